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

// Synthetic corpora with planted library reuse.
//
// Each library has a coding style: a preferred subset of mnemonics and
// registers. Ordinary functions are multi-block bodies drawn mostly from
// that style and form a call graph: low-ranked core routines are the
// largest and are called by the higher-ranked ones. Simple functions are
// 1-3 instruction thunks and stubs shared by everybody. Clones are verbatim
// copies of another library's function, kept internal in the recipient.
// Targets link a call-closed subset of each planted library, the way a
// static linker pulls in callees, plus application code in a style of its
// own.
//
// Only raw 64-bit engine output is consumed (no std distributions) so the
// byte stream for a seed is the same on every standard library.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <unordered_set>

#include "tplscan/embedding.hpp"
#include "tplscan/eval.hpp"

namespace tplscan {

namespace {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, n).
  std::size_t below(std::size_t n) {
    const std::uint64_t bound = n;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do x = engine_();
    while (x >= limit);
    return static_cast<std::size_t>(x % bound);
  }
  std::size_t between(std::size_t lo, std::size_t hi) { return lo + below(hi - lo + 1); }
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  bool chance(double p) { return uniform() < p; }
  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[below(v.size())];
  }
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

const std::vector<std::string> kMnemonics = {
    "mov",   "add",   "sub",    "cmp",   "test",  "lea",   "and",    "or",
    "xor",   "shl",   "shr",    "imul",  "movzx", "movsx", "inc",    "dec",
    "sar",   "cmovne", "cmove", "sete",  "setne", "movss", "addsd",  "mulsd",
    "subsd", "cvtsi2sd", "neg", "not",   "rol",   "ror",   "bt",     "sbb",
    "adc",   "xchg",  "movaps", "pxor",  "movdqu", "paddd", "pshufd", "bswap"};

const std::vector<std::string> kRegisters = {
    "rax", "rbx", "rcx", "rdx", "rsi", "rdi", "r8",  "r9",   "r10",  "r11",  "r12",
    "r13", "r14", "r15", "eax", "ebx", "ecx", "edx", "esi",  "edi",  "r8d",  "r9d",
    "xmm0", "xmm1", "xmm2", "xmm3"};

const std::vector<std::string> kExternals = {
    "malloc", "free",   "memcpy", "memset", "strlen", "strcmp", "printf", "fprintf",
    "fopen",  "fclose", "read",   "write",  "abort",  "realloc", "calloc", "qsort"};

const std::vector<std::string> kConditionalJumps = {"je", "jne", "jl", "jg", "jle", "jge", "jb", "ja"};

bool is_unary(const std::string& m) {
  return m == "inc" || m == "dec" || m == "neg" || m == "not" || m == "bswap";
}

struct Style {
  std::vector<std::string> mnemonics;
  std::vector<std::string> registers;
  std::vector<std::string> jumps;
  double strength = 0.8;
};

Style make_style(Rng& rng, double strength) {
  Style s;
  s.strength = strength;
  auto mn = kMnemonics;
  rng.shuffle(mn);
  s.mnemonics.assign(mn.begin(), mn.begin() + 8);
  auto regs = kRegisters;
  rng.shuffle(regs);
  s.registers.assign(regs.begin(), regs.begin() + 5);
  auto jumps = kConditionalJumps;
  rng.shuffle(jumps);
  s.jumps.assign(jumps.begin(), jumps.begin() + 2);
  return s;
}

std::string hex(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string operand(Rng& rng, const Style& style) {
  const double r = rng.uniform();
  if (r < 0.65)
    return rng.chance(style.strength) ? rng.pick(style.registers) : rng.pick(kRegisters);
  if (r < 0.85) return hex(rng.below(4096));
  return "[" + rng.pick(style.registers) + "+" + hex(8 * rng.below(32)) + "]";
}

Instruction body_instruction(Rng& rng, const Style& style) {
  Instruction insn;
  insn.mnemonic = rng.chance(style.strength) ? rng.pick(style.mnemonics) : rng.pick(kMnemonics);
  if (rng.chance(0.06)) return {"call", {rng.pick(kExternals)}};
  insn.operands.push_back(rng.chance(style.strength) ? rng.pick(style.registers)
                                                     : rng.pick(kRegisters));
  if (!is_unary(insn.mnemonic)) insn.operands.push_back(operand(rng, style));
  return insn;
}

FunctionRecord ordinary_function(Rng& rng, const Style& style, const std::string& name,
                                 std::size_t min_blocks, std::size_t max_blocks,
                                 const std::vector<std::string>& callees) {
  FunctionRecord f;
  f.name = name;
  const std::size_t nblocks = rng.between(min_blocks, max_blocks);
  for (std::size_t b = 0; b < nblocks; ++b) {
    BasicBlock block;
    block.id = static_cast<std::int64_t>(b);
    if (b == 0) {
      block.instructions.push_back({"push", {"rbp"}});
      block.instructions.push_back({"mov", {"rbp", "rsp"}});
    }
    const std::size_t len = rng.between(3, 10);
    for (std::size_t k = 0; k < len; ++k) block.instructions.push_back(body_instruction(rng, style));
    if (b + 1 < nblocks) {
      f.edges.push_back({block.id, block.id + 1});
      if (rng.chance(0.6)) {
        const auto target = static_cast<std::int64_t>(rng.between(b + 1, nblocks - 1));
        block.instructions.push_back(
            {rng.chance(style.strength) ? rng.pick(style.jumps) : rng.pick(kConditionalJumps),
             {".L" + std::to_string(target)}});
        if (target != block.id + 1) f.edges.push_back({block.id, target});
      }
    } else {
      block.instructions.push_back({"pop", {"rbp"}});
      block.instructions.push_back({"ret", {}});
    }
    f.blocks.push_back(std::move(block));
  }
  for (const auto& callee : callees) {
    auto& insns = f.blocks[rng.below(nblocks)].instructions;
    const std::size_t lo = &insns == &f.blocks[0].instructions ? 2 : 0;
    insns.insert(insns.begin() + static_cast<std::ptrdiff_t>(rng.between(lo, insns.size() - 1)),
                 Instruction{"call", {callee}});
  }
  return f;
}

// Names of same-document functions called from `f`.
std::vector<std::string> local_callees(const FunctionRecord& f,
                                       const std::unordered_set<std::string>& names) {
  std::vector<std::string> out;
  for (const auto& b : f.blocks)
    for (const auto& insn : b.instructions)
      if (insn.mnemonic == "call" && insn.operands.size() == 1 && names.count(insn.operands[0]))
        out.push_back(insn.operands[0]);
  return out;
}

void rename_callees(FunctionRecord& f, const std::map<std::string, std::string>& renames) {
  for (auto& b : f.blocks)
    for (auto& insn : b.instructions)
      if (insn.mnemonic == "call" && insn.operands.size() == 1) {
        auto it = renames.find(insn.operands[0]);
        if (it != renames.end()) insn.operands[0] = it->second;
      }
}

// Thunks, constant getters and field accessors: the same shapes appear in
// every library.
FunctionRecord simple_function(Rng& rng, const std::string& name) {
  FunctionRecord f;
  f.name = name;
  BasicBlock b;
  switch (rng.below(5)) {
    case 0:
      b.instructions = {{"jmp", {rng.pick(kExternals)}}};
      break;
    case 1:
      b.instructions = {{"mov", {"eax", hex(rng.below(256))}}, {"ret", {}}};
      break;
    case 2:
      b.instructions = {{"xor", {"eax", "eax"}}, {"ret", {}}};
      break;
    case 3:
      b.instructions = {{"mov", {"rax", "[rdi+" + hex(8 * rng.below(8)) + "]"}}, {"ret", {}}};
      break;
    default:
      b.instructions = {{"push", {"rbp"}}, {"call", {rng.pick(kExternals)}}, {"ret", {}}};
      break;
  }
  f.blocks.push_back(std::move(b));
  return f;
}

FunctionRecord stub(const std::string& name, const std::string& section, Rng& rng) {
  FunctionRecord f;
  f.name = name;
  f.section = section;
  BasicBlock b;
  if (section == ".plt")
    b.instructions = {{"jmp", {"qword ptr [rip+" + hex(rng.below(65536)) + "]"}}};
  else
    b.instructions = {{"sub", {"rsp", "0x8"}}, {"add", {"rsp", "0x8"}}, {"ret", {}}};
  f.blocks.push_back(std::move(b));
  return f;
}

void check_rate(double r, const char* what) {
  if (!(r >= 0.0 && r <= 1.0))
    throw ConfigError(std::string(what) + " must be in [0, 1], got " + std::to_string(r));
}

std::string library_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "libsyn%02zu", i);
  return buf;
}

}  // namespace

void plant_random_reuse(SyntheticCorpusSpec& spec, std::size_t count, std::size_t min_libs,
                        std::size_t max_libs, double min_fraction, double max_fraction,
                        const std::string& prefix, std::uint64_t seed) {
  if (min_libs > max_libs || max_libs > spec.library_count)
    throw ConfigError("invalid library count range for planted reuse");
  Rng rng(seed);
  for (std::size_t t = 0; t < count; ++t) {
    PlantedBinary b;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s%03zu", prefix.c_str(), t);
    b.binary_id = buf;
    std::vector<std::size_t> libs(spec.library_count);
    for (std::size_t i = 0; i < libs.size(); ++i) libs[i] = i;
    rng.shuffle(libs);
    const std::size_t k = rng.between(min_libs, max_libs);
    for (std::size_t i = 0; i < k; ++i)
      b.reuse.push_back({libs[i], min_fraction + (max_fraction - min_fraction) * rng.uniform()});
    std::sort(b.reuse.begin(), b.reuse.end(),
              [](const PlantedReuse& a, const PlantedReuse& c) { return a.library < c.library; });
    spec.planted.push_back(std::move(b));
  }
}

SyntheticCorpus generate_corpus(const SyntheticCorpusSpec& spec) {
  check_rate(spec.clone_rate, "clone_rate");
  check_rate(spec.simple_fn_rate, "simple_fn_rate");
  check_rate(spec.export_rate, "export_rate");
  check_rate(spec.style_strength, "style_strength");
  if (spec.library_count == 0 || spec.functions_per_library == 0)
    throw ConfigError("corpus needs at least one library and one function per library");
  for (const auto& p : spec.planted)
    for (const auto& r : p.reuse) {
      if (r.library >= spec.library_count)
        throw ConfigError("planted binary '" + p.binary_id + "' names library index " +
                          std::to_string(r.library) + " out of range");
      check_rate(r.fraction, "planted fraction");
    }

  SyntheticCorpus corpus;
  const std::size_t n = spec.functions_per_library;

  // Libraries: own functions first, clones patched in afterwards so that
  // every donor body is final before it is copied.
  for (std::size_t l = 0; l < spec.library_count; ++l) {
    Rng rng(derive_seed(spec.rng_seed, l));
    const Style style = make_style(rng, spec.style_strength);
    BinaryDocument doc;
    doc.binary_id = library_name(l);
    doc.kind = BinaryKind::kTpl;
    const auto simple_count = static_cast<std::size_t>(std::llround(spec.simple_fn_rate * n));
    const std::size_t core_count = std::max<std::size_t>(1, (n - std::min(n, simple_count)) / 5);
    for (std::size_t i = 0; i < n; ++i) {
      const std::string name = doc.binary_id + "_fn" + std::to_string(i);
      FunctionRecord f;
      if (i < simple_count) {
        f = simple_function(rng, name);
      } else {
        const std::size_t rank = i - simple_count;
        std::vector<std::string> callees;
        // Core routines form a chain; everything else enters it from the top
        // and may call one more lower-ranked routine.
        auto fn = [&](std::size_t r) { return doc.binary_id + "_fn" + std::to_string(simple_count + r); };
        if (rank > 0 && rank < core_count) {
          callees.push_back(fn(rank - 1));
        } else if (rank >= core_count) {
          callees.push_back(fn(core_count - 1));
          if (rng.chance(0.5)) callees.push_back(fn(rng.below(rank)));
        }
        f = rank < core_count ? ordinary_function(rng, style, name, 7, 10, callees)
                              : ordinary_function(rng, style, name, 2, 4, callees);
      }
      const bool core = i >= simple_count && i - simple_count < core_count;
      f.is_export = rng.chance(spec.export_rate) || (core && spec.export_rate > 0.0);
      doc.functions.push_back(std::move(f));
    }
    doc.functions.push_back(stub(doc.binary_id + "_plt0", ".plt", rng));
    doc.functions.push_back(stub(doc.binary_id + "_plt1", ".plt", rng));
    doc.functions.push_back(stub("_init", ".init", rng));
    doc.functions.push_back(stub("_fini", ".fini", rng));
    corpus.libraries.push_back(std::move(doc));
  }

  const auto clones = static_cast<std::size_t>(std::llround(spec.clone_rate * n));
  if (clones > 0 && spec.library_count > 1) {
    Rng rng(derive_seed(spec.rng_seed, 0xC10E));
    const auto simple_count = static_cast<std::size_t>(std::llround(spec.simple_fn_rate * n));
    const auto originals = corpus.libraries;
    std::vector<std::unordered_set<std::string>> donor_names;
    for (const auto& doc : originals) donor_names.push_back(function_names(doc));
    for (std::size_t l = 0; l < spec.library_count; ++l) {
      auto& recipient = corpus.libraries[l];
      for (std::size_t c = 0; c < clones && c < n; ++c) {
        std::size_t donor = rng.below(spec.library_count - 1);
        if (donor >= l) ++donor;
        const auto& donor_doc = originals[donor];
        const std::size_t src = simple_count < n ? rng.between(simple_count, n - 1) : rng.below(n);
        FunctionRecord copy = donor_doc.functions[src];
        // Replace the recipient's last ordinary functions, keeping names
        // unique within the recipient. Calls into the donor are pointed at
        // recipient functions so the body tokens stay identical.
        auto& slot = recipient.functions[n - 1 - c];
        std::map<std::string, std::string> renames;
        for (const auto& callee : local_callees(copy, donor_names[donor]))
          renames[callee] = recipient.functions[rng.below(n - clones)].name;
        rename_callees(copy, renames);
        copy.name = slot.name;
        copy.is_export = false;
        slot = std::move(copy);
      }
    }
  }

  for (std::size_t t = 0; t < spec.planted.size(); ++t) {
    const auto& plan = spec.planted[t];
    Rng rng(derive_seed(spec.rng_seed, 0x10000 + t));
    const Style app_style = make_style(rng, spec.style_strength);
    // Copied functions remember their library so calls can be renamed.
    std::vector<std::pair<FunctionRecord, std::size_t>> body;
    auto& truth = corpus.manifest[plan.binary_id];
    for (const auto& reuse : plan.reuse) {
      const auto& lib = corpus.libraries[reuse.library];
      const auto names = function_names(lib);
      std::map<std::string, std::size_t> index;
      std::vector<std::size_t> candidates;
      for (std::size_t i = 0; i < lib.functions.size(); ++i) {
        index[lib.functions[i].name] = i;
        if (!SectionFilter{}.excludes(lib.functions[i].section)) candidates.push_back(i);
      }
      rng.shuffle(candidates);
      const auto take = static_cast<std::size_t>(
          std::ceil(reuse.fraction * static_cast<double>(candidates.size()) - 1e-12));
      if (take == 0) continue;
      truth.insert(lib.binary_id);
      std::vector<bool> linked(lib.functions.size(), false);
      std::size_t linked_count = 0;
      for (std::size_t k = 0; k < candidates.size() && linked_count < take; ++k) {
        std::vector<std::size_t> stack{candidates[k]};
        while (!stack.empty()) {
          const std::size_t i = stack.back();
          stack.pop_back();
          if (linked[i]) continue;
          linked[i] = true;
          ++linked_count;
          for (const auto& callee : local_callees(lib.functions[i], names))
            stack.push_back(index.at(callee));
        }
      }
      for (std::size_t i = 0; i < lib.functions.size(); ++i)
        if (linked[i]) body.emplace_back(lib.functions[i], reuse.library);
    }
    const std::size_t kApp = corpus.libraries.size();
    const auto distractors = spec.distractors_per_target;
    for (std::size_t k = 0; k < distractors; ++k) {
      FunctionRecord f = rng.chance(spec.simple_fn_rate)
                             ? simple_function(rng, "app")
                             : ordinary_function(rng, app_style, "app", 2, 6, {});
      body.emplace_back(std::move(f), kApp);
    }
    rng.shuffle(body);

    BinaryDocument doc;
    doc.binary_id = plan.binary_id;
    doc.kind = BinaryKind::kTarget;
    std::vector<std::map<std::string, std::string>> renames(kApp);
    std::uint64_t addr = 0x401000;
    for (auto& [f, lib] : body) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "sub_%llx", static_cast<unsigned long long>(addr));
      if (lib != kApp) renames[lib][f.name] = buf;
      f.name = buf;
      f.section = ".text";
      f.is_export = false;
      addr += 0x40 + 0x10 * f.instruction_count();
    }
    for (auto& [f, lib] : body) {
      if (lib != kApp) rename_callees(f, renames[lib]);
      doc.functions.push_back(std::move(f));
    }
    doc.functions.push_back(stub("plt_stub0", ".plt", rng));
    doc.functions.push_back(stub("_init", ".init", rng));
    corpus.targets.push_back(std::move(doc));
  }
  return corpus;
}

}  // namespace tplscan
