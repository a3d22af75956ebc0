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


#include <sstream>
#include <string>

#include "doctest.h"
#include "test_util.hpp"
#include "tplscan/errors.hpp"
#include "tplscan/interchange.hpp"

using namespace tplscan;
using tplscan::testing::make_function;

namespace {

const char* kHeader = R"({"type":"header","binary_id":"libfoo","kind":"tpl","format_version":1})";

std::string with_header(const std::string& body) { return std::string(kHeader) + "\n" + body; }

template <typename E>
std::string error_of(const std::string& text) {
  try {
    parse_document(text);
  } catch (const E& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("minimal document parses") {
  const auto doc = parse_document(with_header(
      R"({"type":"function","name":"f","section":".text","export":true,"blocks":[{"id":0,"insns":[["ret"]]}],"edges":[]})"));
  CHECK(doc.binary_id == "libfoo");
  CHECK(doc.kind == BinaryKind::kTpl);
  REQUIRE(doc.functions.size() == 1);
  CHECK(doc.functions[0].is_export);
  CHECK(doc.functions[0].instruction_count() == 1);
  CHECK(doc.functions[0].blocks[0].instructions[0].mnemonic == "ret");
}

TEST_CASE("blank lines are ignored and file order is kept") {
  const auto doc = parse_document(
      "\n" + with_header(
                 "\n"
                 R"({"type":"function","name":"b","section":".text","export":false,"blocks":[{"id":0,"insns":[["ret"]]}],"edges":[]})"
                 "\n\n"
                 R"({"type":"function","name":"a","section":".text","export":false,"blocks":[{"id":0,"insns":[["nop"]]}],"edges":[]})"
                 "\n"));
  REQUIRE(doc.functions.size() == 2);
  CHECK(doc.functions[0].name == "b");
  CHECK(doc.functions[1].name == "a");
}

TEST_CASE("edge to a missing block names the function") {
  const auto msg = error_of<ValidationError>(with_header(
      R"({"type":"function","name":"broken_fn","section":".text","export":false,"blocks":[{"id":0,"insns":[["ret"]]}],"edges":[[0,7]]})"));
  CHECK(msg.find("broken_fn") != std::string::npos);
  CHECK(msg.find("7") != std::string::npos);
}

TEST_CASE("duplicate function name is rejected") {
  const std::string fn =
      R"({"type":"function","name":"foo","section":".text","export":false,"blocks":[{"id":0,"insns":[["ret"]]}],"edges":[]})";
  const auto msg = error_of<ValidationError>(with_header(fn + "\n" + fn));
  CHECK(msg.find("foo") != std::string::npos);
}

TEST_CASE("parse errors carry the line number") {
  const auto msg = error_of<ParseError>(with_header("{not json"));
  CHECK(msg.find("line 2") != std::string::npos);
  CHECK(error_of<ParseError>(
            R"({"type":"function","name":"f","section":".text","export":false,"blocks":[],"edges":[]})")
            .find("line 1") != std::string::npos);
  CHECK_THROWS_AS(parse_document(""), ParseError);
  CHECK_THROWS_AS(parse_document(with_header(R"({"type":"mystery"})")), ParseError);
  CHECK_THROWS_AS(parse_document(with_header(R"({"type":"function","name":"f"})")), ParseError);
  CHECK_THROWS_AS(parse_document(std::string(kHeader) + "\n" + kHeader), ParseError);
}

TEST_CASE("invariant violations") {
  auto fn = [](const std::string& blocks, const std::string& edges = "[]") {
    return with_header(R"({"type":"function","name":"g","section":".text","export":false,"blocks":)" +
                       blocks + R"(,"edges":)" + edges + "}");
  };
  CHECK_THROWS_AS(parse_document(fn("[]")), ValidationError);
  CHECK_THROWS_AS(parse_document(fn(R"([{"id":0,"insns":[]}])")), ValidationError);
  CHECK_THROWS_AS(parse_document(fn(R"([{"id":0,"insns":[[""]]}])")), ValidationError);
  CHECK_THROWS_AS(parse_document(fn(R"([{"id":0,"insns":[[]]}])")), ValidationError);
  CHECK_THROWS_AS(parse_document(fn(R"([{"id":0,"insns":[["ret"]]},{"id":0,"insns":[["ret"]]}])")),
                  ValidationError);
  CHECK_THROWS_AS(parse_document(fn(R"([{"id":0,"insns":[["ret"]]}])", "[[0]]")), ValidationError);
  CHECK_THROWS_AS(
      parse_document(
          R"({"type":"header","binary_id":"x","kind":"tpl","format_version":2})"),
      ValidationError);
  CHECK_THROWS_AS(
      parse_document(R"({"type":"header","binary_id":"x","kind":"shared","format_version":1})"),
      ValidationError);
  CHECK_THROWS_AS(
      parse_document(R"({"type":"header","binary_id":"","kind":"tpl","format_version":1})"),
      ValidationError);
}

TEST_CASE("block order in the file may differ from id order") {
  const auto doc = parse_document(with_header(
      R"({"type":"function","name":"f","section":".text","export":false,"blocks":[{"id":5,"insns":[["ret"]]},{"id":-1,"insns":[["push","rbp"]]}],"edges":[[-1,5]]})"));
  REQUIRE(doc.functions[0].blocks.size() == 2);
  CHECK(doc.functions[0].blocks[0].id == 5);
}

TEST_CASE("filter_sections") {
  BinaryDocument doc;
  doc.binary_id = "lib";
  const char* sections[] = {".text", ".plt", ".text", ".plt", ".text"};
  for (int i = 0; i < 5; ++i) {
    auto f = make_function("f" + std::to_string(i), {{"ret"}});
    f.section = sections[i];
    doc.functions.push_back(f);
  }
  const auto out = filter_sections(doc);
  REQUIRE(out.functions.size() == 3);
  CHECK(out.functions[0].name == "f0");
  CHECK(out.functions[1].name == "f2");
  CHECK(out.functions[2].name == "f4");

  BinaryDocument text = doc;
  for (auto& f : text.functions) f.section = ".text";
  CHECK(filter_sections(text) == text);

  BinaryDocument excluded = doc;
  const char* bad[] = {".plt", "extern", ".init", ".fini", ".plt"};
  for (int i = 0; i < 5; ++i) excluded.functions[i].section = bad[i];
  const auto empty = filter_sections(excluded);
  CHECK(empty.functions.empty());
  CHECK(parse_document(serialize_document(empty)) == empty);

  SUBCASE("case-sensitive exact match") {
    BinaryDocument d = doc;
    d.functions[0].section = ".PLT";
    d.functions[2].section = ".plt.got";
    CHECK(filter_sections(d).functions.size() == 3);
  }
  SUBCASE("configurable") {
    SectionFilter only_text{{".text"}};
    CHECK(filter_sections(doc, only_text).functions.size() == 2);
  }
}

TEST_CASE("filter_sections is idempotent and preserves retained records") {
  testing::Rand r(7);
  for (int it = 0; it < 200; ++it) {
    const auto doc = testing::random_document(r, 20);
    const auto once = filter_sections(doc);
    CHECK(filter_sections(once) == once);
    std::size_t k = 0;
    for (const auto& f : doc.functions) {
      if (SectionFilter{}.excludes(f.section)) continue;
      REQUIRE(k < once.functions.size());
      CHECK(once.functions[k++] == f);
    }
    CHECK(k == once.functions.size());
  }
}

TEST_CASE("empty function list serializes to a valid document") {
  BinaryDocument doc;
  doc.binary_id = "empty";
  doc.kind = BinaryKind::kTarget;
  const auto text = serialize_document(doc);
  CHECK(parse_document(text) == doc);
}

TEST_CASE("random documents round-trip") {
  testing::Rand r(2026);
  for (int it = 0; it < 500; ++it) {
    const auto doc = testing::random_document(r, 12);
    const auto text = serialize_document(doc);
    const auto back = parse_document(text);
    REQUIRE(back == doc);
    CHECK(serialize_document(back) == text);
  }
}

TEST_CASE("10,000 function document round-trips") {
  testing::Rand r(10000);
  BinaryDocument doc;
  doc.binary_id = "big";
  for (int i = 0; i < 10000; ++i)
    doc.functions.push_back(testing::random_function(r, "f" + std::to_string(i)));
  std::stringstream ss;
  serialize_document(doc, ss);
  CHECK(parse_document(ss) == doc);
}

TEST_CASE("file round-trip") {
  testing::TempDir dir("interchange");
  testing::Rand r(3);
  const auto doc = testing::random_document(r, 30);
  write_document_file(doc, dir.file("doc.jsonl"));
  CHECK(read_document_file(dir.file("doc.jsonl")) == doc);
  CHECK_THROWS_AS(read_document_file(dir.file("missing.jsonl")), Error);
}

TEST_CASE("binary kind names") {
  CHECK(to_string(BinaryKind::kTpl) == "tpl");
  CHECK(to_string(BinaryKind::kTarget) == "target");
  CHECK(parse_binary_kind("target") == BinaryKind::kTarget);
}
