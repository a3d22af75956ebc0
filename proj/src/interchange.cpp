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

#include "tplscan/interchange.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "tplscan/errors.hpp"

namespace tplscan {

using ojson = nlohmann::ordered_json;

std::size_t FunctionRecord::instruction_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks) n += b.instructions.size();
  return n;
}

std::string_view to_string(BinaryKind kind) {
  return kind == BinaryKind::kTpl ? "tpl" : "target";
}

BinaryKind parse_binary_kind(std::string_view text) {
  if (text == "tpl") return BinaryKind::kTpl;
  if (text == "target") return BinaryKind::kTarget;
  throw ValidationError("unknown binary kind '" + std::string(text) + "'");
}

void validate_function(const FunctionRecord& f) {
  auto fail = [&](const std::string& msg) {
    throw ValidationError("function '" + f.name + "': " + msg);
  };
  if (f.name.empty()) throw ValidationError("function with empty name");
  if (f.blocks.empty()) fail("no basic blocks");
  std::unordered_set<std::int64_t> ids;
  for (const auto& b : f.blocks) {
    if (!ids.insert(b.id).second)
      fail("duplicate block id " + std::to_string(b.id));
    for (const auto& insn : b.instructions)
      if (insn.mnemonic.empty()) fail("empty mnemonic in block " + std::to_string(b.id));
  }
  if (f.instruction_count() == 0) fail("empty function body");
  for (const auto& e : f.edges) {
    if (!ids.count(e.from))
      fail("edge references missing block id " + std::to_string(e.from));
    if (!ids.count(e.to))
      fail("edge references missing block id " + std::to_string(e.to));
  }
}

void validate_document(const BinaryDocument& doc) {
  if (doc.binary_id.empty()) throw ValidationError("document has empty binary_id");
  if (doc.format_version != kInterchangeFormatVersion)
    throw ValidationError("unsupported format_version " +
                          std::to_string(doc.format_version));
  std::unordered_set<std::string> names;
  for (const auto& f : doc.functions) {
    validate_function(f);
    if (!names.insert(f.name).second)
      throw ValidationError("function '" + f.name + "': duplicate name");
  }
}

namespace {

FunctionRecord function_from_json(const ojson& j) {
  FunctionRecord f;
  f.name = j.at("name").get<std::string>();
  f.section = j.at("section").get<std::string>();
  f.is_export = j.at("export").get<bool>();
  for (const auto& jb : j.at("blocks")) {
    BasicBlock b;
    b.id = jb.at("id").get<std::int64_t>();
    for (const auto& ji : jb.at("insns")) {
      if (!ji.is_array() || ji.empty())
        throw ValidationError("function '" + f.name + "': instruction must be a non-empty array");
      Instruction insn;
      insn.mnemonic = ji[0].get<std::string>();
      for (std::size_t k = 1; k < ji.size(); ++k)
        insn.operands.push_back(ji[k].get<std::string>());
      b.instructions.push_back(std::move(insn));
    }
    f.blocks.push_back(std::move(b));
  }
  for (const auto& je : j.at("edges")) {
    if (!je.is_array() || je.size() != 2)
      throw ValidationError("function '" + f.name + "': edge must be a [from, to] pair");
    f.edges.push_back({je[0].get<std::int64_t>(), je[1].get<std::int64_t>()});
  }
  return f;
}

ojson function_to_json(const FunctionRecord& f) {
  ojson blocks = ojson::array();
  for (const auto& b : f.blocks) {
    ojson insns = ojson::array();
    for (const auto& insn : b.instructions) {
      ojson ji = ojson::array({insn.mnemonic});
      for (const auto& op : insn.operands) ji.push_back(op);
      insns.push_back(std::move(ji));
    }
    blocks.push_back(ojson{{"id", b.id}, {"insns", std::move(insns)}});
  }
  ojson edges = ojson::array();
  for (const auto& e : f.edges) edges.push_back(ojson::array({e.from, e.to}));
  return ojson{{"type", "function"}, {"name", f.name},     {"section", f.section},
               {"export", f.is_export}, {"blocks", std::move(blocks)},
               {"edges", std::move(edges)}};
}

bool is_blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

}  // namespace

BinaryDocument parse_document(std::istream& in) {
  BinaryDocument doc;
  bool have_header = false;
  std::unordered_set<std::string> names;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_blank(line)) continue;
    ojson j;
    try {
      j = ojson::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("malformed record: ") + e.what(), lineno);
    }
    try {
      const auto type = j.at("type").get<std::string>();
      if (type == "header") {
        if (have_header) throw ParseError("duplicate header record", lineno);
        doc.binary_id = j.at("binary_id").get<std::string>();
        doc.kind = parse_binary_kind(j.at("kind").get<std::string>());
        doc.format_version = j.at("format_version").get<int>();
        if (doc.format_version != kInterchangeFormatVersion)
          throw ValidationError("unsupported format_version " +
                                std::to_string(doc.format_version));
        have_header = true;
      } else if (type == "function") {
        if (!have_header) throw ParseError("function record before header", lineno);
        auto f = function_from_json(j);
        validate_function(f);
        if (!names.insert(f.name).second)
          throw ValidationError("function '" + f.name + "': duplicate name");
        doc.functions.push_back(std::move(f));
      } else {
        throw ParseError("unknown record type '" + type + "'", lineno);
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad record field: ") + e.what(), lineno);
    }
  }
  if (!have_header) throw ParseError("missing header record", lineno);
  if (doc.binary_id.empty()) throw ValidationError("document has empty binary_id");
  return doc;
}

BinaryDocument parse_document(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_document(in);
}

BinaryDocument read_document_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  return parse_document(in);
}

void serialize_document(const BinaryDocument& doc, std::ostream& out) {
  ojson header{{"type", "header"},
               {"binary_id", doc.binary_id},
               {"kind", to_string(doc.kind)},
               {"format_version", doc.format_version}};
  out << header.dump() << '\n';
  for (const auto& f : doc.functions) out << function_to_json(f).dump() << '\n';
}

std::string serialize_document(const BinaryDocument& doc) {
  std::ostringstream out;
  serialize_document(doc, out);
  return out.str();
}

void write_document_file(const BinaryDocument& doc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  serialize_document(doc, out);
}

BinaryDocument filter_sections(const BinaryDocument& doc, const SectionFilter& filter) {
  BinaryDocument out;
  out.binary_id = doc.binary_id;
  out.kind = doc.kind;
  out.format_version = doc.format_version;
  for (const auto& f : doc.functions)
    if (!filter.excludes(f.section)) out.functions.push_back(f);
  return out;
}

}  // namespace tplscan
