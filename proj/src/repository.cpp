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

#include "tplscan/repository.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>

#include "json.hpp"

namespace tplscan {

std::size_t TplRepository::feature_count() const {
  std::size_t n = 0;
  for (const auto& [id, features] : libraries) n += features.size();
  return n;
}

TplRepository build_origin(const std::vector<BinaryDocument>& docs, const Embedder& embedder,
                           const WarningSink& warn) {
  if (docs.empty()) throw ValidationError("empty library corpus");
  TplRepository repo;
  repo.config.dim = embedder.dim();
  repo.config.embedder_id = embedder.id();
  repo.config.embedder_seed = embedder.seed();
  repo.config.stages = {false, false, false};
  for (const auto& doc : docs) {
    if (doc.kind != BinaryKind::kTpl)
      throw ValidationError("document '" + doc.binary_id + "' is not a library");
    if (repo.libraries.count(doc.binary_id))
      throw ValidationError("duplicate library id '" + doc.binary_id + "'");
    auto& features = repo.libraries[doc.binary_id];
    if (doc.functions.empty() && warn)
      warn("library '" + doc.binary_id + "' has no functions after section filtering");
    const auto embeddings = embedder.embed_all(doc);
    features.reserve(doc.functions.size());
    for (std::size_t i = 0; i < doc.functions.size(); ++i) {
      const auto& f = doc.functions[i];
      FunctionFeature ff;
      ff.library_id = doc.binary_id;
      ff.function_name = f.name;
      ff.embedding = embeddings[i];
      ff.profile = compute_profile(f);
      ff.is_export = f.is_export;
      features.push_back(std::move(ff));
    }
  }
  const auto n = static_cast<std::int64_t>(repo.feature_count());
  repo.stats = {n, n, n, 0.0};
  return repo;
}

TplRepository purify_export(const TplRepository& repo) {
  TplRepository out;
  out.config = repo.config;
  out.config.stages.export_filter = true;
  for (const auto& [id, features] : repo.libraries) {
    auto& kept = out.libraries[id];
    std::copy_if(features.begin(), features.end(), std::back_inserter(kept),
                 [](const FunctionFeature& f) { return f.is_export; });
  }
  const auto n = static_cast<std::int64_t>(out.feature_count());
  out.stats = repo.stats;
  out.stats.after_export = n;
  out.stats.after_mi = n;
  return out;
}

double mi_cutoff(std::vector<double> mi_values, double theta2) {
  if (!(theta2 > 0.0 && theta2 <= 1.0))
    throw ConfigError("MI retention fraction must be in (0, 1], got " + std::to_string(theta2));
  if (mi_values.empty()) return 0.0;
  std::sort(mi_values.begin(), mi_values.end());
  const auto total = static_cast<double>(mi_values.size());
  // Candidates are population values; at the first occurrence of value v,
  // the index equals the number of values strictly below v.
  double best = mi_values.front();
  for (std::size_t k = 1; k < mi_values.size(); ++k) {
    if (mi_values[k] == mi_values[k - 1]) continue;
    if (static_cast<double>(k) / total > theta2) break;
    best = mi_values[k];
  }
  return best;
}

TplRepository purify_mi(const TplRepository& repo, double theta2, const WarningSink& warn) {
  std::vector<double> population;
  population.reserve(repo.feature_count());
  for (const auto& [id, features] : repo.libraries)
    for (const auto& f : features) population.push_back(f.profile.mi);
  const double cutoff = mi_cutoff(population, theta2);

  TplRepository out;
  out.config = repo.config;
  out.config.theta2 = theta2;
  out.config.stages.mi_filter = true;
  for (const auto& [id, features] : repo.libraries) {
    auto& kept = out.libraries[id];
    std::copy_if(features.begin(), features.end(), std::back_inserter(kept),
                 [&](const FunctionFeature& f) { return f.profile.mi < cutoff; });
  }
  out.stats = repo.stats;
  out.stats.after_mi = static_cast<std::int64_t>(out.feature_count());
  out.stats.mi_cutoff = cutoff;
  if (warn && !population.empty() && out.stats.after_mi == 0)
    warn("MI filter removed every function (all MI values tie at the cutoff)");
  if (warn) {
    for (const auto& [id, kept] : out.libraries)
      if (kept.empty() && !repo.libraries.at(id).empty())
        warn("library '" + id + "' has no functions left after the MI filter");
  }
  return out;
}

TplRepository compute_weights(const TplRepository& repo, double theta1, ExecPolicy policy) {
  TplRepository out = repo;
  out.config.theta1 = theta1;
  out.config.stages.weights = true;

  std::vector<FunctionFeature*> flat;
  std::vector<std::size_t> library_of;
  std::vector<Embedding> vectors;
  std::size_t lib_index = 0;
  for (auto& [id, features] : out.libraries) {
    for (auto& f : features) {
      flat.push_back(&f);
      library_of.push_back(lib_index);
      vectors.push_back(f.embedding);
    }
    ++lib_index;
  }
  const PackedRows packed = pack(vectors);
  const auto counts = count_neighbours(packed, library_of, out.libraries.size(), theta1, policy);

  const auto library_count = static_cast<double>(out.libraries.size());
  for (std::size_t i = 0; i < flat.size(); ++i) {
    FunctionFeature& f = *flat[i];
    const auto lib_size = static_cast<double>(out.libraries.at(f.library_id).size());
    f.n_in_library = counts.same_library[i];
    f.df = counts.other_libraries[i];
    const double tf = static_cast<double>(f.n_in_library) / lib_size;
    const double idf = std::log(library_count / static_cast<double>(f.df + 1));
    f.weight = std::max(0.0, tf * idf);
  }
  return out;
}

TplRepository uniform_weights(const TplRepository& repo) {
  TplRepository out = repo;
  out.config.stages.weights = false;
  for (auto& [id, features] : out.libraries)
    for (auto& f : features) {
      f.weight = 1.0;
      f.df = 0;
      f.n_in_library = 1;
    }
  return out;
}

// ---------------------------------------------------------------------------
// Binary container: magic, u32 version, u64 payload size, payload,
// u32 CRC-32 of the payload. All integers little-endian.

namespace {

constexpr char kMagic[8] = {'T', 'P', 'L', 'S', 'R', 'E', 'P', 'O'};

static_assert(std::endian::native == std::endian::little,
              "repository encoding assumes a little-endian host");

class ByteWriter {
 public:
  template <typename T>
  void pod(T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    bytes_.append(buf, sizeof(T));
  }
  void u8(std::uint8_t v) { pod(v); }
  void u32(std::uint32_t v) { pod(v); }
  void u64(std::uint64_t v) { pod(v); }
  void i64(std::int64_t v) { pod(v); }
  void f64(double v) { pod(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    bytes_ += s;
  }
  const std::string& bytes() const { return bytes_; }

 private:
  std::string bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::uint8_t u8() { return pod<std::uint8_t>(); }
  std::uint32_t u32() { return pod<std::uint32_t>(); }
  std::uint64_t u64() { return pod<std::uint64_t>(); }
  std::int64_t i64() { return pod<std::int64_t>(); }
  double f64() { return std::bit_cast<double>(pod<std::uint64_t>()); }
  std::string str() {
    const auto n = u64();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::uint64_t n) const {
    if (n > bytes_.size() - pos_) throw FormatError("repository payload ends early");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t crc(const std::string& bytes) {
  uLong c = crc32(0L, Z_NULL, 0);
  c = crc32_z(c, reinterpret_cast<const Bytef*>(bytes.data()), bytes.size());
  return static_cast<std::uint32_t>(c);
}

std::uint8_t pack_flags(const StageFlags& s) {
  return static_cast<std::uint8_t>((s.export_filter ? 1 : 0) | (s.mi_filter ? 2 : 0) |
                                   (s.weights ? 4 : 0));
}

StageFlags unpack_flags(std::uint8_t b) {
  return {(b & 1) != 0, (b & 2) != 0, (b & 4) != 0};
}

std::string encode_payload(const TplRepository& repo) {
  ByteWriter w;
  const auto& c = repo.config;
  w.f64(c.theta1);
  w.f64(c.theta2);
  w.u64(c.dim);
  w.str(c.embedder_id);
  w.u64(c.embedder_seed);
  w.u8(pack_flags(c.stages));
  w.i64(repo.stats.origin);
  w.i64(repo.stats.after_export);
  w.i64(repo.stats.after_mi);
  w.f64(repo.stats.mi_cutoff);
  w.u64(repo.libraries.size());
  for (const auto& [id, features] : repo.libraries) {
    w.str(id);
    w.u64(features.size());
    for (const auto& f : features) {
      w.str(f.function_name);
      w.u8(f.is_export ? 1 : 0);
      w.f64(f.profile.hv);
      w.i64(f.profile.loc);
      w.i64(f.profile.cc);
      w.f64(f.profile.mi);
      w.f64(f.weight);
      w.i64(f.df);
      w.i64(f.n_in_library);
      w.u64(f.embedding.dim());
      for (double v : f.embedding.values()) w.f64(v);
    }
  }
  return w.bytes();
}

TplRepository decode_payload(const std::string& payload) {
  ByteReader r(payload);
  TplRepository repo;
  auto& c = repo.config;
  c.theta1 = r.f64();
  c.theta2 = r.f64();
  c.dim = r.u64();
  c.embedder_id = r.str();
  c.embedder_seed = r.u64();
  c.stages = unpack_flags(r.u8());
  repo.stats.origin = r.i64();
  repo.stats.after_export = r.i64();
  repo.stats.after_mi = r.i64();
  repo.stats.mi_cutoff = r.f64();
  const auto nlib = r.u64();
  for (std::uint64_t l = 0; l < nlib; ++l) {
    const auto id = r.str();
    auto& features = repo.libraries[id];
    const auto nf = r.u64();
    for (std::uint64_t k = 0; k < nf; ++k) {
      FunctionFeature f;
      f.library_id = id;
      f.function_name = r.str();
      f.is_export = r.u8() != 0;
      f.profile.hv = r.f64();
      f.profile.loc = r.i64();
      f.profile.cc = r.i64();
      f.profile.mi = r.f64();
      f.weight = r.f64();
      f.df = r.i64();
      f.n_in_library = r.i64();
      const auto d = r.u64();
      if (d != c.dim) throw FormatError("feature '" + f.function_name + "' has wrong dimension");
      std::vector<double> values(d);
      for (auto& v : values) v = r.f64();
      f.embedding = Embedding(std::move(values));
      features.push_back(std::move(f));
    }
  }
  if (!r.done()) throw FormatError("trailing bytes in repository payload");
  return repo;
}

}  // namespace

void persist(const TplRepository& repo, std::ostream& out) {
  const std::string payload = encode_payload(repo);
  ByteWriter head;
  for (char ch : kMagic) head.pod(ch);
  head.u32(kRepositoryFormatVersion);
  head.u64(payload.size());
  ByteWriter tail;
  tail.u32(crc(payload));
  out << head.bytes() << payload << tail.bytes();
  if (!out) throw Error("failed writing repository");
}

void persist_file(const TplRepository& repo, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  persist(repo, out);
}

TplRepository load(std::istream& in) {
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  constexpr std::size_t kHeader = sizeof(kMagic) + 4 + 8;
  if (bytes.size() < kHeader || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw FormatError("not a tplscan repository");
  ByteReader head(bytes);
  for (std::size_t i = 0; i < sizeof(kMagic); ++i) head.pod<char>();
  const auto version = head.u32();
  if (version != kRepositoryFormatVersion)
    throw VersionError("repository format version " + std::to_string(version) +
                       " is not supported (expected " +
                       std::to_string(kRepositoryFormatVersion) + ")");
  const auto size = head.u64();
  if (bytes.size() != kHeader + size + 4)
    throw ChecksumError("repository file is truncated or has trailing data");
  const std::string payload = bytes.substr(kHeader, size);
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + kHeader + size, 4);
  if (stored != crc(payload)) throw ChecksumError("repository checksum mismatch");
  return decode_payload(payload);
}

TplRepository load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  return load(in);
}

// ---------------------------------------------------------------------------
// Ground truth

GroundTruthManifest parse_manifest(std::istream& in) {
  using nlohmann::json;
  GroundTruthManifest m;
  try {
    const json j = json::parse(in);
    if (!j.is_object()) throw ParseError("manifest must be a JSON object", 0);
    for (const auto& [binary, libs] : j.items()) {
      auto& set = m[binary];
      for (const auto& lib : libs) set.insert(lib.get<std::string>());
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad manifest: ") + e.what(), 0);
  }
  return m;
}

GroundTruthManifest read_manifest_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  return parse_manifest(in);
}

void write_manifest(const GroundTruthManifest& manifest, std::ostream& out) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [binary, libs] : manifest) j[binary] = std::vector<std::string>(libs.begin(), libs.end());
  out << j.dump(2) << '\n';
}

void validate_manifest(const GroundTruthManifest& manifest, const TplRepository& repo) {
  for (const auto& [binary, libs] : manifest)
    for (const auto& lib : libs)
      if (!repo.libraries.count(lib))
        throw ValidationError("manifest entry '" + binary + "' names unknown library '" + lib +
                              "'");
}

}  // namespace tplscan
