// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>

#include "kane/config.hpp"
#include "kane/error.hpp"
#include "kane/io.hpp"

using namespace kane;

namespace {

Bundle synthetic_bundle(std::uint64_t seed = 7) {
  SyntheticSpec spec;
  spec.seed = seed;
  spec.entities = 20;
  auto ds = generate_synthetic_kg(spec);
  return {std::move(ds.kg), std::move(ds.split)};
}

}  // namespace

TEST(Checksum, KnownFnvVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}

TEST(Bundle, RoundTripIsExact) {
  const auto b = synthetic_bundle();
  const auto text = serialize_bundle(b);
  const auto back = deserialize_bundle(text);
  EXPECT_EQ(serialize_bundle(back), text);
  EXPECT_EQ(bundle_checksum(back), bundle_checksum(b));
  EXPECT_EQ(back.kg.relation_triples(), b.kg.relation_triples());
  EXPECT_EQ(back.kg.attribute_triples(), b.kg.attribute_triples());
  EXPECT_EQ(back.split.train, b.split.train);
  EXPECT_EQ(back.split.test, b.split.test);
  EXPECT_EQ(back.split.label_test, b.split.label_test);
  EXPECT_NO_THROW(check_split(back.kg, back.split));
}

TEST(Bundle, EditedBodyFailsChecksum) {
  auto text = serialize_bundle(synthetic_bundle());
  const auto pos = text.rfind('e');
  text[pos] = 'E';
  EXPECT_THROW(deserialize_bundle(text), IoError);
}

TEST(Bundle, WrongMagicIsParseError) {
  EXPECT_THROW(deserialize_bundle("NOT-A-BUNDLE\n"), ParseError);
}

TEST(Bundle, DifferentDataDifferentChecksum) {
  EXPECT_NE(bundle_checksum(synthetic_bundle(1)), bundle_checksum(synthetic_bundle(2)));
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto b = synthetic_bundle();
  TrainConfig cfg;
  cfg.model.dim = 6;
  cfg.model.head_dim = 4;
  cfg.model.aggregator = Aggregator::Concat;
  cfg.model.encoder = Encoder::Lstm;
  cfg.learning_rate = 0.0123456789012345;
  Rng rng(3);
  Checkpoint ck{cfg, bundle_checksum(b), rng.state(),
                init_params(cfg.model, model_sizes(b.kg, b.split, cfg.model), rng)};
  const auto bytes = serialize_checkpoint(ck);
  const auto back = deserialize_checkpoint(bytes);
  EXPECT_EQ(to_key_values(back.config), to_key_values(cfg));
  EXPECT_EQ(back.bundle_checksum, ck.bundle_checksum);
  EXPECT_EQ(back.rng_state, ck.rng_state);
  const auto pa = ck.params.all();
  const auto pb = back.params.all();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i]->name, pb[i]->name);
    EXPECT_EQ(pa[i]->shape, pb[i]->shape);
    EXPECT_EQ(pa[i]->value, pb[i]->value);
  }
  EXPECT_EQ(serialize_checkpoint(back), bytes);
  EXPECT_NO_THROW(check_params(back.params, back.config.model, model_sizes(b.kg, b.split, cfg.model)));
}

TEST(Checkpoint, TruncatedIsRejected) {
  const auto b = synthetic_bundle();
  TrainConfig cfg;
  cfg.model.dim = cfg.model.head_dim = 4;
  Rng rng(1);
  Checkpoint ck{cfg, bundle_checksum(b), rng.state(),
                init_params(cfg.model, model_sizes(b.kg, b.split, cfg.model), rng)};
  const auto bytes = serialize_checkpoint(ck);
  EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, bytes.size() / 2)), Error);
  EXPECT_THROW(deserialize_checkpoint("garbage"), Error);
}

TEST(Rng, StateRoundTrip) {
  Rng a(99);
  a.next();
  Rng b;
  b.set_state(a.state());
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a.next(), b.next());
}

TEST(Export, RoundTripKeepsEveryBit) {
  const std::vector<std::string> names{"alpha", "Ünïcode name", "c"};
  const std::vector<double> rows{0.1, -1e-300, 1.0 / 3.0, 2.5e10, -0.0, 123456.789};
  const auto text = format_embeddings(names, rows, 2);
  EXPECT_EQ(text.substr(0, text.find('\n')), "#3 2");
  const auto back = parse_embeddings(text);
  EXPECT_EQ(back.names, names);
  EXPECT_EQ(back.dim, 2u);
  EXPECT_EQ(back.rows, rows);
}

TEST(Export, BadRowWidthIsParseError) {
  EXPECT_THROW(parse_embeddings("#1 2\na\t1\n"), ParseError);
}

TEST(Files, AtomicWriteThenRead) {
  const auto dir = std::filesystem::temp_directory_path() / "kane_io_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "x.txt";
  write_file_atomic(path, "hello\nworld");
  EXPECT_EQ(read_file(path), "hello\nworld");
  write_file_atomic(path, "again");
  EXPECT_EQ(read_file(path), "again");
  std::filesystem::remove_all(dir);
  EXPECT_THROW(read_file(dir / "missing"), IoError);
}
