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

#include "tplscan/embedding.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "json.hpp"
#include "tplscan/errors.hpp"

namespace tplscan {

std::string_view to_string(TokenClass c) {
  switch (c) {
    case TokenClass::kMnemonic: return "MNEMONIC";
    case TokenClass::kReg: return "REG";
    case TokenClass::kImm: return "IMM";
    case TokenClass::kMem: return "MEM";
    case TokenClass::kNearFunc: return "NEARFUNC";
    case TokenClass::kExtFunc: return "EXTFUNC";
  }
  return "?";
}

Embedding::Embedding(std::vector<double> values) : values_(std::move(values)) {
  double sq = 0.0;
  for (double v : values_) sq += v * v;
  norm_ = std::sqrt(sq);
}

Embedding Embedding::unit(std::vector<double> values) {
  double sq = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) throw ValidationError("embedding has a non-finite component");
    sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (!(norm > 0.0) || !std::isfinite(norm))
    throw ValidationError("embedding has zero or non-finite norm");
  for (double& v : values) v /= norm;
  return Embedding(std::move(values));
}

// ---------------------------------------------------------------------------
// Normalization

namespace {

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_branch(std::string_view mnemonic) {
  const std::string m = lower(mnemonic);
  if (m.empty()) return false;
  if (m[0] == 'j' || starts_with(m, "call") || starts_with(m, "loop")) return true;
  // AArch32/AArch64 spellings.
  return m == "b" || m == "bl" || m == "blx" || m == "bx" || starts_with(m, "b.") ||
         m == "cbz" || m == "cbnz";
}

bool all_of(std::string_view s, int (*pred)(int)) {
  return !s.empty() &&
         std::all_of(s.begin(), s.end(), [&](char c) { return pred(static_cast<unsigned char>(c)) != 0; });
}

bool is_immediate(std::string_view op) {
  if (!op.empty() && op[0] == '#') op.remove_prefix(1);
  if (!op.empty() && (op[0] == '-' || op[0] == '+')) op.remove_prefix(1);
  if (op.empty()) return false;
  if (op.size() > 2 && op[0] == '0' && (op[1] == 'x' || op[1] == 'X'))
    return all_of(op.substr(2), isxdigit);
  if (op.size() > 1 && (op.back() == 'h' || op.back() == 'H') && std::isdigit(static_cast<unsigned char>(op[0])))
    return all_of(op.substr(0, op.size() - 1), isxdigit);
  return all_of(op, isdigit);
}

bool is_memory(std::string_view op) {
  return op.find('[') != std::string_view::npos;
}

bool is_local_label(std::string_view op) {
  if (starts_with(op, "short ")) op.remove_prefix(6);
  return starts_with(op, ".L") || starts_with(op, "loc_") || starts_with(op, "locret_");
}

bool is_register(std::string_view op) {
  static const std::unordered_set<std::string> kNamed = {
      "rax", "rbx", "rcx", "rdx", "rsi", "rdi", "rbp", "rsp", "rip", "eax", "ebx", "ecx",
      "edx", "esi", "edi", "ebp", "esp", "eip", "ax",  "bx",  "cx",  "dx",  "si",  "di",
      "bp",  "sp",  "al",  "bl",  "cl",  "dl",  "ah",  "bh",  "ch",  "dh",  "sil", "dil",
      "bpl", "spl", "lr",  "pc",  "fp",  "ip",  "xzr", "wzr"};
  const std::string s = lower(op);
  if (kNamed.count(s)) return true;
  auto numbered = [&](std::string_view prefix) {
    if (!starts_with(s, prefix)) return false;
    std::string_view rest = std::string_view(s).substr(prefix.size());
    while (!rest.empty() && (rest.back() == 'd' || rest.back() == 'w' || rest.back() == 'b'))
      rest.remove_suffix(1);
    return all_of(rest, isdigit);
  };
  return numbered("r") || numbered("x") || numbered("w") || numbered("xmm") ||
         numbered("ymm") || numbered("zmm") || numbered("v") || numbered("q") ||
         numbered("d") || numbered("s");
}

}  // namespace

std::unordered_set<std::string> function_names(const BinaryDocument& doc) {
  std::unordered_set<std::string> names;
  for (const auto& f : doc.functions) names.insert(f.name);
  return names;
}

std::vector<NormalizedToken> normalize(const FunctionRecord& f,
                                       const std::unordered_set<std::string>& local_functions) {
  std::vector<const BasicBlock*> order;
  order.reserve(f.blocks.size());
  for (const auto& b : f.blocks) order.push_back(&b);
  std::stable_sort(order.begin(), order.end(),
                   [](const BasicBlock* a, const BasicBlock* b) { return a->id < b->id; });

  std::vector<NormalizedToken> tokens;
  for (const BasicBlock* b : order) {
    for (const auto& insn : b->instructions) {
      tokens.push_back({insn.mnemonic, TokenClass::kMnemonic});
      const bool branch = is_branch(insn.mnemonic);
      for (const auto& op : insn.operands) {
        if (is_memory(op)) {
          tokens.push_back({"MEM", TokenClass::kMem});
        } else if (is_immediate(op)) {
          tokens.push_back({"IMM", TokenClass::kImm});
        } else if (branch && !is_register(op)) {
          const bool near = local_functions.count(op) != 0 || is_local_label(op);
          tokens.push_back(near ? NormalizedToken{"NEARFUNC", TokenClass::kNearFunc}
                                : NormalizedToken{"EXTFUNC", TokenClass::kExtFunc});
        } else {
          tokens.push_back({op, TokenClass::kReg});
        }
      }
    }
  }
  return tokens;
}

std::vector<NormalizedToken> normalize(const FunctionRecord& f) {
  return normalize(f, {});
}

// ---------------------------------------------------------------------------
// Hashing embedder

namespace {

// FNV-1a over the bytes, finished with the splitmix64 mixer so that low
// bits (bucket) and the top bit (sign) are both well distributed.
std::uint64_t hash_bytes(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  h ^= h >> 30;
  h *= 0xbf58476d1ce4e5b9ULL;
  h ^= h >> 27;
  h *= 0x94d049bb133111ebULL;
  h ^= h >> 31;
  return h;
}

std::string token_key(const NormalizedToken& t) {
  std::string key;
  key.reserve(t.text.size() + 2);
  key.push_back(static_cast<char>('0' + static_cast<int>(t.cls)));
  key.push_back(':');
  key += t.text;
  return key;
}

}  // namespace

Embedding embed(std::span<const NormalizedToken> tokens, std::size_t dim, std::uint64_t seed) {
  if (tokens.empty()) throw ValidationError("cannot embed an empty token stream");
  if (dim == 0) throw DimensionError("embedding dimension must be positive");
  std::vector<std::string> keys;
  keys.reserve(tokens.size());
  for (const auto& t : tokens) keys.push_back(token_key(t));
  std::vector<std::uint64_t> hashes;
  hashes.reserve(2 * keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    hashes.push_back(hash_bytes("u|" + keys[i], seed));
    if (i + 1 < keys.size()) hashes.push_back(hash_bytes("b|" + keys[i] + '\x1f' + keys[i + 1], seed));
  }
  // Sublinear term frequency: a feature seen c times contributes 1 + ln c,
  // so ubiquitous tokens (IMM, MEM, prologue registers) do not swamp the
  // vector. Sorting fixes the summation order.
  std::sort(hashes.begin(), hashes.end());
  std::vector<double> v(dim, 0.0);
  for (std::size_t i = 0; i < hashes.size();) {
    std::size_t j = i;
    while (j < hashes.size() && hashes[j] == hashes[i]) ++j;
    const double tf = 1.0 + std::log(static_cast<double>(j - i));
    const std::uint64_t h = hashes[i];
    v[h % dim] += (h >> 63) ? -tf : tf;
    i = j;
  }
  if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) {
    // Every feature cancelled against a colliding opposite-signed one. Fall
    // back to a single bucket keyed by the whole stream.
    std::string all;
    for (const auto& k : keys) all += k + '\x1e';
    v[hash_bytes(all, seed) % dim] = 1.0;
  }
  return Embedding::unit(std::move(v));
}

double cosine(const Embedding& a, const Embedding& b) {
  if (a.dim() != b.dim())
    throw DimensionError("cosine of embeddings with dimensions " + std::to_string(a.dim()) +
                         " and " + std::to_string(b.dim()));
  double dot = 0.0;
  const auto x = a.values(), y = b.values();
  for (std::size_t k = 0; k < x.size(); ++k) dot += x[k] * y[k];
  return dot / (a.norm() * b.norm());
}

PackedRows pack(std::span<const Embedding> rows) {
  PackedRows p;
  p.rows = rows.size();
  p.cols = rows.empty() ? 0 : rows.front().dim();
  p.data.reserve(p.rows * p.cols);
  p.norms.reserve(p.rows);
  for (const auto& e : rows) {
    if (e.dim() != p.cols)
      throw DimensionError("mixed embedding dimensions " + std::to_string(p.cols) + " and " +
                           std::to_string(e.dim()));
    p.data.insert(p.data.end(), e.values().begin(), e.values().end());
    p.norms.push_back(e.norm());
  }
  return p;
}

SimilarityMatrix batched_similarity(std::span<const Embedding> queries,
                                    std::span<const Embedding> keys, std::size_t batch,
                                    ExecPolicy policy) {
  if (batch == 0) throw ConfigError("batch size must be at least 1");
  const PackedRows q = pack(queries);
  const PackedRows k = pack(keys);
  if (q.rows && k.rows && q.cols != k.cols)
    throw DimensionError("query dimension " + std::to_string(q.cols) + " != key dimension " +
                         std::to_string(k.cols));
  SimilarityMatrix m;
  m.rows = q.rows;
  m.cols = k.rows;
  m.data.assign(m.rows * m.cols, 0.0);
  for (std::size_t begin = 0; begin < q.rows; begin += batch) {
    const std::size_t end = std::min(q.rows, begin + batch);
    if (policy == ExecPolicy::kSerial)
      kernels::cosine_rows_serial(q, k, begin, end, m);
    else
      kernels::cosine_rows_omp(q, k, begin, end, m);
  }
  return m;
}

// ---------------------------------------------------------------------------
// External vector tables

EmbeddingTable import_embeddings(const BinaryDocument& doc, std::istream& table,
                                 std::size_t dim) {
  using nlohmann::json;
  const auto names = function_names(doc);
  EmbeddingTable out;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  std::size_t declared = 0;
  while (std::getline(table, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed vector record: ") + e.what(), lineno);
    }
    try {
      const auto type = j.at("type").get<std::string>();
      if (type == "header") {
        if (have_header) throw ParseError("duplicate header", lineno);
        const auto doc_id = j.at("doc_id").get<std::string>();
        if (doc_id != doc.binary_id)
          throw ValidationError("vector table is for '" + doc_id + "', expected '" +
                                doc.binary_id + "'");
        const auto d = j.at("dim").get<std::size_t>();
        if (d != dim)
          throw DimensionError("vector table dimension " + std::to_string(d) +
                               " != repository dimension " + std::to_string(dim));
        declared = j.at("count").get<std::size_t>();
        have_header = true;
      } else if (type == "vector") {
        if (!have_header) throw ParseError("vector record before header", lineno);
        const auto name = j.at("name").get<std::string>();
        if (!names.count(name))
          throw ValidationError("vector for unknown function '" + name + "'");
        auto values = j.at("values").get<std::vector<double>>();
        if (values.size() != dim)
          throw DimensionError("vector for '" + name + "' has dimension " +
                               std::to_string(values.size()) + ", expected " +
                               std::to_string(dim));
        Embedding e;
        try {
          e = Embedding::unit(std::move(values));
        } catch (const ValidationError& err) {
          throw ValidationError("vector for '" + name + "': " + err.what());
        }
        if (!out.emplace(name, std::move(e)).second)
          throw ValidationError("duplicate vector for '" + name + "'");
      } else {
        throw ParseError("unknown record type '" + type + "'", lineno);
      }
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad vector record: ") + e.what(), lineno);
    }
  }
  if (!have_header) throw ParseError("missing vector table header", lineno);
  if (declared != out.size())
    throw ValidationError("vector table declares " + std::to_string(declared) +
                          " records but holds " + std::to_string(out.size()));
  return out;
}

EmbeddingTable import_embeddings_file(const BinaryDocument& doc, const std::string& path,
                                      std::size_t dim) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  return import_embeddings(doc, in, dim);
}

void write_embeddings(const std::string& doc_id, const EmbeddingTable& table,
                      std::ostream& out) {
  using nlohmann::ordered_json;
  const std::size_t dim = table.empty() ? 0 : table.begin()->second.dim();
  out << ordered_json{{"type", "header"}, {"doc_id", doc_id}, {"dim", dim}, {"count", table.size()}}
             .dump()
      << '\n';
  for (const auto& [name, e] : table) {
    ordered_json j{{"type", "vector"}, {"name", name}};
    j["values"] = std::vector<double>(e.values().begin(), e.values().end());
    out << j.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------
// Embedders

HashingEmbedder::HashingEmbedder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim == 0) throw ConfigError("embedding dimension must be positive");
}

Embedding HashingEmbedder::embed(const FunctionRecord& f, const BinaryDocument& doc) const {
  const auto tokens = normalize(f, function_names(doc));
  return tplscan::embed(tokens, dim_, seed_);
}

std::vector<Embedding> Embedder::embed_all(const BinaryDocument& doc) const {
  std::vector<Embedding> out;
  out.reserve(doc.functions.size());
  for (const auto& f : doc.functions) out.push_back(embed(f, doc));
  return out;
}

std::vector<Embedding> HashingEmbedder::embed_all(const BinaryDocument& doc) const {
  const auto names = function_names(doc);
  std::vector<Embedding> out(doc.functions.size());
  const auto n = static_cast<std::int64_t>(doc.functions.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& f = doc.functions[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(i)] = tplscan::embed(normalize(f, names), dim_, seed_);
  }
  return out;
}

void ExternalEmbedder::add_table(const std::string& doc_id, EmbeddingTable table) {
  for (const auto& [name, e] : table)
    if (e.dim() != dim_)
      throw DimensionError("vector for '" + name + "' has dimension " + std::to_string(e.dim()) +
                           ", expected " + std::to_string(dim_));
  tables_[doc_id] = std::move(table);
}

Embedding ExternalEmbedder::embed(const FunctionRecord& f, const BinaryDocument& doc) const {
  auto t = tables_.find(doc.binary_id);
  if (t == tables_.end())
    throw ValidationError("no imported vectors for document '" + doc.binary_id + "'");
  auto e = t->second.find(f.name);
  if (e == t->second.end())
    throw ValidationError("no imported vector for function '" + f.name + "' in '" +
                          doc.binary_id + "'");
  return e->second;
}

EmbeddedBinary embed_binary(const BinaryDocument& doc, const Embedder& embedder) {
  EmbeddedBinary out;
  out.binary_id = doc.binary_id;
  out.embedder_id = embedder.id();
  out.embedder_seed = embedder.seed();
  out.dim = embedder.dim();
  out.function_names.reserve(doc.functions.size());
  for (const auto& f : doc.functions) out.function_names.push_back(f.name);
  out.embeddings = embedder.embed_all(doc);
  return out;
}

}  // namespace tplscan
