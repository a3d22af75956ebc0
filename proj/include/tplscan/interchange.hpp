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

// Disassembly interchange documents: one binary (a library or a target
// program) as a list of functions with their basic blocks and CFG edges.
// The on-disk layout is described in docs/FORMAT.md.

#ifndef TPLSCAN_INTERCHANGE_HPP
#define TPLSCAN_INTERCHANGE_HPP

#include <cstdint>
#include <iosfwd>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tplscan {

inline constexpr int kInterchangeFormatVersion = 1;

struct Instruction {
  std::string mnemonic;
  std::vector<std::string> operands;

  bool operator==(const Instruction&) const = default;
};

struct BasicBlock {
  std::int64_t id = 0;
  std::vector<Instruction> instructions;

  bool operator==(const BasicBlock&) const = default;
};

struct CfgEdge {
  std::int64_t from = 0;
  std::int64_t to = 0;

  bool operator==(const CfgEdge&) const = default;
};

struct FunctionRecord {
  std::string name;
  std::string section = ".text";
  bool is_export = false;
  std::vector<BasicBlock> blocks;
  std::vector<CfgEdge> edges;

  std::size_t instruction_count() const;
  bool operator==(const FunctionRecord&) const = default;
};

enum class BinaryKind { kTpl, kTarget };

std::string_view to_string(BinaryKind kind);
BinaryKind parse_binary_kind(std::string_view text);

struct BinaryDocument {
  std::string binary_id;
  BinaryKind kind = BinaryKind::kTpl;
  std::vector<FunctionRecord> functions;
  int format_version = kInterchangeFormatVersion;

  bool operator==(const BinaryDocument&) const = default;
};

// Throws ValidationError naming the offending function.
void validate_function(const FunctionRecord& f);
void validate_document(const BinaryDocument& doc);

// Throws ParseError (with line number) on syntax errors, ValidationError on
// invariant violations.
BinaryDocument parse_document(std::istream& in);
BinaryDocument parse_document(std::string_view text);
BinaryDocument read_document_file(const std::string& path);

void serialize_document(const BinaryDocument& doc, std::ostream& out);
std::string serialize_document(const BinaryDocument& doc);
void write_document_file(const BinaryDocument& doc, const std::string& path);

// Sections whose functions are linker or runtime scaffolding rather than
// library code. Matched case-sensitively.
struct SectionFilter {
  std::set<std::string> excluded{".plt", "extern", ".init", ".fini"};

  bool excludes(const std::string& section) const {
    return excluded.count(section) != 0;
  }
};

BinaryDocument filter_sections(const BinaryDocument& doc,
                               const SectionFilter& filter = {});

}  // namespace tplscan

#endif  // TPLSCAN_INTERCHANGE_HPP
