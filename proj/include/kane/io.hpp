// SPDX-License-Identifier: Apache-2.0
//
// On-disk formats.
//
// Dataset bundle (text, UTF-8):
//   KANE-BUNDLE 1
//   checksum <16 hex digits, FNV-1a 64 of everything after this line>
//   entities <n>          then n names, one per line, in id order
//   relations <n>         same
//   words <n>             same
//   values <n>            n lines: <literal><TAB><word ids separated by spaces>
//   relation_triples <n>  n lines: <head> <relation> <tail>
//   attribute_triples <n> n lines: <head> <relation> <value>
//   train|valid|test <n>  n relation-triple indices each
//   classes <n>           n class names
//   labels <n>            n lines: <entity> <class>
//   label_train|label_valid|label_test <n>  n entity ids each
//
// Checkpoint (binary, little-endian):
//   "KANECKPT" u32 version=1
//   str config (key = value lines)   str bundle checksum   str rng state
//   u64 parameter count, then per parameter:
//     str name, u32 rank, u64 dims[rank], f64 values[product(dims)]
//   where str = u64 byte length followed by the bytes.
//
// Embedding export (text): a `#<count> <dim>` header, then one
// `<entity><TAB><v1> <v2> ...` line per entity with 17 significant digits.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "kane/kg.hpp"
#include "kane/model.hpp"
#include "kane/training.hpp"

namespace kane {

std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t x);

struct Bundle {
  KnowledgeGraph kg;
  DatasetSplit split;
};

std::string serialize_bundle(const Bundle& bundle);
/// Verifies the checksum. Throws IoError / ParseError.
Bundle deserialize_bundle(std::string_view text, std::string_view source = "<bundle>");
/// Checksum recorded in a serialized bundle.
std::string bundle_checksum(const Bundle& bundle);

struct Checkpoint {
  TrainConfig config;
  std::string bundle_checksum;
  std::string rng_state;
  ModelParams params;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::string_view bytes);

/// Rebuilds a parameter set from names/shapes in checkpoint order.
ModelParams params_from_list(std::vector<ad::Parameter> list, const ModelConfig& config);

std::string format_embeddings(const std::vector<std::string>& names,
                              std::span<const double> rows, std::size_t dim);
struct ExportedEmbeddings {
  std::vector<std::string> names;
  std::vector<double> rows;
  std::size_t dim = 0;
};
ExportedEmbeddings parse_embeddings(std::string_view text);

std::string read_file(const std::filesystem::path& path);
/// Writes through a temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view data);

}  // namespace kane
