// SPDX-License-Identifier: Apache-2.0
#include "kane/io.hpp"

#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "kane/config.hpp"
#include "kane/error.hpp"

namespace kane {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

namespace {

constexpr std::string_view kBundleMagic = "KANE-BUNDLE 1";

void append_names(std::string& out, const char* section, const std::vector<std::string>& names) {
  out += std::string(section) + " " + std::to_string(names.size()) + "\n";
  for (const auto& n : names) {
    if (n.find_first_of("\t\n") != std::string::npos) {
      throw IoError(std::string(section) + " name contains a tab or newline");
    }
    out += n + "\n";
  }
}

template <typename T, typename F>
void append_list(std::string& out, const char* section, const std::vector<T>& items, F&& line) {
  out += std::string(section) + " " + std::to_string(items.size()) + "\n";
  for (const auto& x : items) out += line(x) + "\n";
}

std::string bundle_body(const Bundle& b) {
  const auto& kg = b.kg;
  const auto& split = b.split;
  std::string out;
  append_names(out, "entities", kg.entities().names());
  append_names(out, "relations", kg.relations().names());
  append_names(out, "words", kg.words().names());
  append_list(out, "values", kg.values(), [](const AttributeValue& v) {
    if (v.literal.find_first_of("\t\n") != std::string::npos) {
      throw IoError("attribute literal contains a tab or newline");
    }
    std::string s = v.literal + "\t";
    for (std::size_t i = 0; i < v.tokens.size(); ++i) {
      s += (i ? " " : "") + std::to_string(v.tokens[i].v);
    }
    return s;
  });
  append_list(out, "relation_triples", kg.relation_triples(), [](const RelationTriple& t) {
    return std::to_string(t.head.v) + " " + std::to_string(t.relation.v) + " " +
           std::to_string(t.tail.v);
  });
  append_list(out, "attribute_triples", kg.attribute_triples(), [](const AttributeTriple& t) {
    return std::to_string(t.head.v) + " " + std::to_string(t.relation.v) + " " +
           std::to_string(t.value.v);
  });

  std::map<RelationTriple, std::size_t> index;
  for (std::size_t i = 0; i < kg.relation_triples().size(); ++i) index[kg.relation_triples()[i]] = i;
  auto triple_index = [&](const RelationTriple& t) {
    auto it = index.find(t);
    if (it == index.end()) throw IoError("split references a triple missing from the graph");
    return std::to_string(it->second);
  };
  append_list(out, "train", split.train, triple_index);
  append_list(out, "valid", split.valid, triple_index);
  append_list(out, "test", split.test, triple_index);
  append_names(out, "classes", split.classes.names());
  std::vector<Label> labels;
  for (std::uint32_t e = 0; e < split.labels.size(); ++e) {
    if (split.labels[e]) labels.push_back({{e}, *split.labels[e]});
  }
  append_list(out, "labels", labels, [](const Label& l) {
    return std::to_string(l.entity.v) + " " + std::to_string(l.cls.v);
  });
  auto entity = [](EntityId e) { return std::to_string(e.v); };
  append_list(out, "label_train", split.label_train, entity);
  append_list(out, "label_valid", split.label_valid, entity);
  append_list(out, "label_test", split.label_test, entity);
  return out;
}

class LineReader {
 public:
  LineReader(std::string_view text, std::string source) : text_(text), source_(std::move(source)) {}

  std::string_view next() {
    if (pos_ > text_.size() || (pos_ == text_.size())) fail("unexpected end of file");
    auto end = text_.find('\n', pos_);
    if (end == std::string_view::npos) end = text_.size();
    auto line = text_.substr(pos_, end - pos_);
    pos_ = end + 1;
    ++line_;
    return line;
  }

  std::size_t header(std::string_view section) {
    const auto line = next();
    const auto prefix = std::string(section) + " ";
    if (line.substr(0, prefix.size()) != prefix) {
      fail("expected section '" + std::string(section) + "'");
    }
    return number(line.substr(prefix.size()));
  }

  std::vector<std::uint32_t> numbers(std::string_view line) {
    std::vector<std::uint32_t> out;
    std::size_t pos = 0;
    while (pos < line.size()) {
      auto sp = line.find(' ', pos);
      if (sp == std::string_view::npos) sp = line.size();
      out.push_back(static_cast<std::uint32_t>(number(line.substr(pos, sp - pos))));
      pos = sp + 1;
    }
    return out;
  }

  std::size_t number(std::string_view s) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
      fail("expected an integer, got '" + std::string(s) + "'");
    }
    return v;
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(source_, line_, what); }

  bool at_end() const { return pos_ >= text_.size(); }

 private:
  std::string_view text_;
  std::string source_;
  std::size_t pos_ = 0;
  std::size_t line_ = 0;
};

}  // namespace

std::string serialize_bundle(const Bundle& bundle) {
  const auto body = bundle_body(bundle);
  return std::string(kBundleMagic) + "\nchecksum " + hex64(fnv1a64(body)) + "\n" + body;
}

std::string bundle_checksum(const Bundle& bundle) { return hex64(fnv1a64(bundle_body(bundle))); }

Bundle deserialize_bundle(std::string_view text, std::string_view source) {
  LineReader in(text, std::string(source));
  if (in.next() != kBundleMagic) in.fail("not a dataset bundle");
  const auto checksum_line = in.next();
  if (checksum_line.substr(0, 9) != "checksum ") in.fail("missing checksum");
  const auto header_end = text.find('\n', text.find('\n') + 1) + 1;
  const auto body = text.substr(header_end);
  if (hex64(fnv1a64(body)) != checksum_line.substr(9)) {
    throw IoError(std::string(source) + ": checksum mismatch, bundle is corrupt or was edited");
  }

  Bundle b;
  auto& kg = b.kg;
  auto& split = b.split;
  for (std::size_t i = 0, n = in.header("entities"); i < n; ++i) kg.intern_entity(in.next());
  for (std::size_t i = 0, n = in.header("relations"); i < n; ++i) kg.intern_relation(in.next());
  std::vector<std::string> words;
  for (std::size_t i = 0, n = in.header("words"); i < n; ++i) words.emplace_back(in.next());
  for (std::size_t i = 0, n = in.header("values"); i < n; ++i) {
    const auto line = in.next();
    const auto tab = line.rfind('\t');
    if (tab == std::string_view::npos) in.fail("value line without token ids");
    const auto id = kg.intern_value(line.substr(0, tab));
    const auto ids = in.numbers(line.substr(tab + 1));
    const auto& value = kg.value(id);
    if (id.v != i || ids.size() != value.tokens.size()) in.fail("value tokens do not match literal");
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (ids[k] != value.tokens[k].v) in.fail("value tokens do not match literal");
    }
  }
  if (kg.words().names() != words) in.fail("word table does not match attribute values");

  std::vector<RelationTriple> rel;
  for (std::size_t i = 0, n = in.header("relation_triples"); i < n; ++i) {
    const auto f = in.numbers(in.next());
    if (f.size() != 3) in.fail("relation triple needs 3 ids");
    rel.push_back({{f[0]}, {f[1]}, {f[2]}});
  }
  if (kg.add_relation_triples(rel) != 0) in.fail("duplicate relation triple");
  std::vector<AttributeTriple> attr;
  for (std::size_t i = 0, n = in.header("attribute_triples"); i < n; ++i) {
    const auto f = in.numbers(in.next());
    if (f.size() != 3) in.fail("attribute triple needs 3 ids");
    attr.push_back({{f[0]}, {f[1]}, {f[2]}});
  }
  if (kg.add_attribute_triples(attr) != 0) in.fail("duplicate attribute triple");

  auto read_part = [&](const char* name, std::vector<RelationTriple>& part) {
    for (std::size_t i = 0, n = in.header(name); i < n; ++i) {
      const auto idx = in.number(in.next());
      if (idx >= rel.size()) in.fail("triple index out of range");
      part.push_back(rel[idx]);
    }
  };
  read_part("train", split.train);
  read_part("valid", split.valid);
  read_part("test", split.test);
  for (std::size_t i = 0, n = in.header("classes"); i < n; ++i) split.classes.intern(in.next());
  split.labels.assign(kg.entity_count(), std::nullopt);
  for (std::size_t i = 0, n = in.header("labels"); i < n; ++i) {
    const auto f = in.numbers(in.next());
    if (f.size() != 2 || f[0] >= kg.entity_count() || f[1] >= split.classes.size()) {
      in.fail("malformed label");
    }
    split.labels[f[0]] = ClassId{f[1]};
  }
  auto read_entities = [&](const char* name, std::vector<EntityId>& part) {
    for (std::size_t i = 0, n = in.header(name); i < n; ++i) {
      const auto e = in.number(in.next());
      if (e >= kg.entity_count()) in.fail("entity id out of range");
      part.push_back(EntityId{static_cast<std::uint32_t>(e)});
    }
  };
  read_entities("label_train", split.label_train);
  read_entities("label_valid", split.label_valid);
  read_entities("label_test", split.label_test);
  if (!in.at_end()) in.fail("trailing data after bundle");
  check_split(kg, split);
  return b;
}

namespace {

constexpr std::string_view kCheckpointMagic = "KANECKPT";
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void put(std::string& out, T x) {
  char buf[sizeof(T)];
  std::memcpy(buf, &x, sizeof(T));
  out.append(buf, sizeof(T));
}

void put_str(std::string& out, std::string_view s) {
  put<std::uint64_t>(out, s.size());
  out.append(s);
}

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T x;
    std::memcpy(&x, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return x;
  }

  std::string_view raw(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::string str() { return std::string(raw(get<std::uint64_t>())); }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw IoError("checkpoint truncated");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out(kCheckpointMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put_str(out, format_key_values(to_key_values(ckpt.config)));
  put_str(out, ckpt.bundle_checksum);
  put_str(out, ckpt.rng_state);
  const auto params = ckpt.params.all();
  put<std::uint64_t>(out, params.size());
  for (const auto* p : params) {
    put_str(out, p->name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p->shape.rank()));
    for (auto d : p->shape.dims()) put<std::uint64_t>(out, d);
    out.append(reinterpret_cast<const char*>(p->value.data()), p->value.size() * sizeof(double));
  }
  return out;
}

ModelParams params_from_list(std::vector<ad::Parameter> list, const ModelConfig& config) {
  std::map<std::string, ad::Parameter> by_name;
  for (auto& p : list) {
    auto name = p.name;
    if (!by_name.emplace(name, std::move(p)).second) {
      throw IoError("duplicate parameter '" + name + "'");
    }
  }
  auto take = [&](const std::string& name) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw IoError("missing parameter '" + name + "'");
    auto p = std::move(it->second);
    by_name.erase(it);
    return p;
  };
  auto take_opt = [&](const std::string& name) -> std::optional<ad::Parameter> {
    if (!by_name.count(name)) return std::nullopt;
    return take(name);
  };

  ModelParams params;
  params.entities = take("entity");
  params.relations = take("relation");
  params.words = take_opt("word");
  if (by_name.count("lstm.input.input")) {
    LstmParams lstm;
    const char* gates[] = {"input", "forget", "output", "candidate"};
    for (std::size_t g = 0; g < 4; ++g) {
      const std::string prefix = std::string("lstm.") + gates[g];
      lstm.input[g] = take(prefix + ".input");
      lstm.hidden[g] = take(prefix + ".hidden");
      lstm.bias[g] = take(prefix + ".bias");
    }
    params.lstm = std::move(lstm);
  }
  for (std::size_t l = 0; l < config.layers; ++l) {
    LayerParams layer;
    for (std::size_t i = 0; i < config.heads; ++i) {
      layer.heads.push_back(take("layer" + std::to_string(l) + ".head" + std::to_string(i)));
    }
    layer.output = take_opt("layer" + std::to_string(l) + ".output");
    params.layers.push_back(std::move(layer));
  }
  params.classifier_weight = take_opt("classifier.weight");
  params.classifier_bias = take_opt("classifier.bias");
  if (!by_name.empty()) throw IoError("unexpected parameter '" + by_name.begin()->first + "'");
  return params;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  ByteReader in(bytes);
  if (bytes.size() < kCheckpointMagic.size() || in.raw(kCheckpointMagic.size()) != kCheckpointMagic) {
    throw IoError("not a checkpoint file");
  }
  const auto version = in.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  apply_settings(ckpt.config, parse_key_values(in.str(), "<checkpoint config>"));
  ckpt.bundle_checksum = in.str();
  ckpt.rng_state = in.str();
  const auto count = in.get<std::uint64_t>();
  std::vector<ad::Parameter> list;
  for (std::uint64_t i = 0; i < count; ++i) {
    auto name = in.str();
    const auto rank = in.get<std::uint32_t>();
    if (rank < 1 || rank > 2) throw IoError("parameter " + name + " has invalid rank");
    std::vector<std::size_t> dims;
    for (std::uint32_t d = 0; d < rank; ++d) dims.push_back(in.get<std::uint64_t>());
    ad::Shape shape(dims);
    std::vector<double> value(shape.size());
    const auto raw = in.raw(value.size() * sizeof(double));
    std::memcpy(value.data(), raw.data(), raw.size());
    list.emplace_back(std::move(name), std::move(shape), std::move(value));
  }
  if (!in.at_end()) throw IoError("trailing bytes after checkpoint");
  ckpt.params = params_from_list(std::move(list), ckpt.config.model);
  return ckpt;
}

std::string format_embeddings(const std::vector<std::string>& names, std::span<const double> rows,
                              std::size_t dim) {
  if (rows.size() != names.size() * dim) throw ShapeError("embedding rows do not match names");
  std::string out = "#" + std::to_string(names.size()) + " " + std::to_string(dim) + "\n";
  char buf[32];
  for (std::size_t i = 0; i < names.size(); ++i) {
    out += names[i];
    out += '\t';
    for (std::size_t j = 0; j < dim; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", rows[i * dim + j]);
      if (j) out += ' ';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

ExportedEmbeddings parse_embeddings(std::string_view text) {
  ExportedEmbeddings out;
  std::size_t pos = 0, line_no = 0, count = 0;
  auto next_line = [&]() {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    return line;
  };
  const auto header = next_line();
  if (header.empty() || header.front() != '#') throw ParseError("<embeddings>", 1, "missing header");
  {
    const auto sp = header.find(' ');
    if (sp == std::string_view::npos) throw ParseError("<embeddings>", 1, "malformed header");
    auto h1 = header.substr(1, sp - 1), h2 = header.substr(sp + 1);
    std::from_chars(h1.data(), h1.data() + h1.size(), count);
    std::from_chars(h2.data(), h2.data() + h2.size(), out.dim);
  }
  while (pos < text.size()) {
    const auto line = next_line();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) throw ParseError("<embeddings>", line_no, "missing tab");
    out.names.emplace_back(line.substr(0, tab));
    std::size_t p = tab + 1, fields = 0;
    while (p <= line.size()) {
      auto sp = line.find(' ', p);
      if (sp == std::string_view::npos) sp = line.size();
      double x = 0;
      auto [ptr, ec] = std::from_chars(line.data() + p, line.data() + sp, x);
      if (ec != std::errc() || ptr != line.data() + sp) {
        throw ParseError("<embeddings>", line_no, "malformed number");
      }
      out.rows.push_back(x);
      ++fields;
      p = sp + 1;
    }
    if (fields != out.dim) throw ParseError("<embeddings>", line_no, "wrong vector length");
  }
  if (out.names.size() != count) throw ParseError("<embeddings>", line_no, "header count mismatch");
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view data) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace kane
