// Copyright 2026 The tplscan Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Function embeddings. Two backends sit behind the Embedder interface:
//
//   HashingEmbedder   normalizes the instruction stream and feature-hashes
//                     token unigrams and bigrams into a fixed-width vector.
//   ExternalEmbedder  serves vectors produced by an external similarity
//                     model, imported from vector tables.
//
// Similarity is always cosine.

#ifndef TPLSCAN_EMBEDDING_HPP
#define TPLSCAN_EMBEDDING_HPP

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "tplscan/interchange.hpp"
#include "tplscan/kernels.hpp"

namespace tplscan {

inline constexpr std::size_t kDefaultDim = 768;
inline constexpr std::size_t kDefaultBatch = 128;
inline constexpr std::uint64_t kDefaultHashSeed = 0x9e3779b97f4a7c15ULL;

enum class TokenClass { kMnemonic, kReg, kImm, kMem, kNearFunc, kExtFunc };

std::string_view to_string(TokenClass c);

struct NormalizedToken {
  std::string text;
  TokenClass cls = TokenClass::kMnemonic;

  bool operator==(const NormalizedToken&) const = default;
};

class Embedding {
 public:
  Embedding() = default;
  // Keeps the values as given and records their Euclidean norm.
  explicit Embedding(std::vector<double> values);

  // Scales to unit length. Throws ValidationError for zero or non-finite
  // input.
  static Embedding unit(std::vector<double> values);

  std::span<const double> values() const { return values_; }
  double norm() const { return norm_; }
  std::size_t dim() const { return values_.size(); }

  bool operator==(const Embedding&) const = default;

 private:
  std::vector<double> values_;
  double norm_ = 0.0;
};

// Immediates become IMM, memory expressions MEM, branch targets NEARFUNC
// (a function named in `local_functions` or a local label) or EXTFUNC.
// Mnemonics and registers are kept verbatim. Blocks are visited in
// ascending id order.
std::vector<NormalizedToken> normalize(const FunctionRecord& f,
                                       const std::unordered_set<std::string>& local_functions);
std::vector<NormalizedToken> normalize(const FunctionRecord& f);

std::unordered_set<std::string> function_names(const BinaryDocument& doc);

// Signed feature hashing of unigrams and adjacent bigrams, L2-normalized.
// Throws ValidationError on an empty token list.
Embedding embed(std::span<const NormalizedToken> tokens, std::size_t dim,
                std::uint64_t seed = kDefaultHashSeed);

// Throws DimensionError on mismatched dimensions.
double cosine(const Embedding& a, const Embedding& b);

// M[i][j] = cosine(queries[i], keys[j]). Rows are processed `batch` at a
// time; the result does not depend on `batch` or on the policy.
SimilarityMatrix batched_similarity(std::span<const Embedding> queries,
                                    std::span<const Embedding> keys,
                                    std::size_t batch = kDefaultBatch,
                                    ExecPolicy policy = ExecPolicy::kParallel);

PackedRows pack(std::span<const Embedding> rows);

using EmbeddingTable = std::map<std::string, Embedding>;

// Reads an external vector table for document `doc`. Vectors are
// normalized on import.
EmbeddingTable import_embeddings(const BinaryDocument& doc, std::istream& table,
                                 std::size_t dim);
EmbeddingTable import_embeddings_file(const BinaryDocument& doc, const std::string& path,
                                      std::size_t dim);
void write_embeddings(const std::string& doc_id, const EmbeddingTable& table,
                      std::ostream& out);

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::string id() const = 0;
  virtual std::uint64_t seed() const = 0;
  virtual std::size_t dim() const = 0;
  virtual Embedding embed(const FunctionRecord& f, const BinaryDocument& doc) const = 0;
  // One embedding per function of `doc`, in document order.
  virtual std::vector<Embedding> embed_all(const BinaryDocument& doc) const;
};

class HashingEmbedder final : public Embedder {
 public:
  static constexpr std::string_view kId = "builtin-hash-ngram-v1";

  explicit HashingEmbedder(std::size_t dim = kDefaultDim, std::uint64_t seed = kDefaultHashSeed);

  std::string id() const override { return std::string(kId); }
  std::uint64_t seed() const override { return seed_; }
  std::size_t dim() const override { return dim_; }
  Embedding embed(const FunctionRecord& f, const BinaryDocument& doc) const override;
  std::vector<Embedding> embed_all(const BinaryDocument& doc) const override;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

class ExternalEmbedder final : public Embedder {
 public:
  static constexpr std::string_view kId = "external";

  explicit ExternalEmbedder(std::size_t dim) : dim_(dim) {}

  void add_table(const std::string& doc_id, EmbeddingTable table);

  std::string id() const override { return std::string(kId); }
  std::uint64_t seed() const override { return 0; }
  std::size_t dim() const override { return dim_; }
  // Throws ValidationError when no vector was imported for the function.
  Embedding embed(const FunctionRecord& f, const BinaryDocument& doc) const override;

 private:
  std::size_t dim_;
  std::map<std::string, EmbeddingTable> tables_;
};

// A section-filtered target binary, embedded with one embedder.
struct EmbeddedBinary {
  std::string binary_id;
  std::string embedder_id;
  std::uint64_t embedder_seed = 0;
  std::size_t dim = 0;
  std::vector<std::string> function_names;
  std::vector<Embedding> embeddings;
};

EmbeddedBinary embed_binary(const BinaryDocument& doc, const Embedder& embedder);

}  // namespace tplscan

#endif  // TPLSCAN_EMBEDDING_HPP
