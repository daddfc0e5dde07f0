#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "hfspec/error.hpp"
#include "hfspec/manifest.hpp"
#include "hfspec/model_io.hpp"
#include "hfspec/table_io.hpp"
#include "test_support.hpp"

namespace hfspec {
namespace {

std::string error_of(const std::string& json) {
  try {
    parse_spin_model(json, "cfg.json");
  } catch (const InputError& e) {
    return e.what();
  }
  return {};
}

const char* kUnits = R"("units": {"Q": "MHz", "M": "MHz_per_T", "B": "mT"})";

std::string model_json(const std::string& ground_q) {
  const std::string zero = R"({"matrix": [[0,0,0],[0,0,0],[0,0,0]]})";
  return std::string("{") + kUnits + R"(, "ground": {"Q": )" + ground_q + R"(, "M": )" + zero +
         R"(}, "excited": {"Q": )" + zero + R"(, "M": )" + zero + "}}";
}

TEST(ModelIo, SurrogateLoads) {
  const SpinModel& m = testing::surrogate_model();
  EXPECT_GT(m.ground.Q.matrix().norm(), 1.0);
}

TEST(ModelIo, JsonRoundTrip) {
  const SpinModel& m = testing::surrogate_model();
  const SpinModel back = parse_spin_model(spin_model_to_json(m));
  EXPECT_LT((back.ground.Q.matrix() - m.ground.Q.matrix()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((back.excited.M.matrix() - m.excited.M.matrix()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ModelIo, RejectsUnitMismatch) {
  std::string json = model_json(R"({"principal": [1, 2, -3], "euler_deg": [0, 0, 0]})");
  json.replace(json.find("MHz_per_T"), 9, "MHz_per_mT");
  const std::string msg = error_of(json);
  EXPECT_NE(msg.find("units.M"), std::string::npos) << msg;
}

TEST(ModelIo, RejectsAsymmetricTensorWithPath) {
  const std::string msg = error_of(model_json(R"({"matrix": [[1,0.5,0],[0,1,0],[0,0,1]]})"));
  EXPECT_NE(msg.find("ground.Q"), std::string::npos) << msg;
  EXPECT_NE(msg.find("symmetric"), std::string::npos) << msg;
}

TEST(ModelIo, ReportsSyntaxPosition) {
  const std::string msg = error_of("{\n  \"units\": ,\n}");
  EXPECT_NE(msg.find("cfg.json:2:"), std::string::npos) << msg;
}

TEST(ModelIo, PrincipalFormMatchesMatrixForm) {
  const SpinModel a = parse_spin_model(model_json(R"({"principal": [1, 2, -3], "euler_deg": [0, 0, 0]})"));
  const SpinModel b = parse_spin_model(model_json(R"({"matrix": [[1,0,0],[0,2,0],[0,0,-3]]})"));
  EXPECT_EQ(a.ground.Q, b.ground.Q);
}

TEST(FieldArg, ParsesTriplet) {
  const FieldVector f = parse_field("-22.7, 249.2,0");
  EXPECT_DOUBLE_EQ(f[0], -22.7);
  EXPECT_DOUBLE_EQ(f[1], 249.2);
  EXPECT_THROW(parse_field("1,2"), InputError);
  EXPECT_THROW(parse_field("1,x,3"), InputError);
}

TEST(Csv, SkipsCommentsAndTrims) {
  const CsvTable t = parse_csv("# note\na, b\n\n 1 ,2\n3,4\n");
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.header[1], "b");
  EXPECT_EQ(t.number(0, 0), 1.0);
  EXPECT_EQ(t.line_numbers[1], 5);
}

TEST(Csv, FieldCountMismatchNamesLine) {
  try {
    parse_csv("a,b\n1,2\n3\n", "x.csv");
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("x.csv:3"), std::string::npos);
  }
}

TEST(Csv, DoublesRoundTrip) {
  for (double v : {0.1, -23.935, 1.0 / 3.0, 6.94e-33, 1e300}) {
    EXPECT_EQ(parse_double(format_double(v), "v"), v);
  }
  EXPECT_THROW(parse_double("1,5", "v"), InputError);
  EXPECT_THROW(parse_double("", "v"), InputError);
}

TEST(Csv, WriterRoundTrip) {
  CsvWriter w({"freq_MHz", "od"});
  w.row({format_double(-1.5), format_double(0.25)}).row({format_double(2.0), format_double(1e-9)});
  const CsvTable t = parse_csv(w.str());
  EXPECT_EQ(t.number(1, 1), 1e-9);
  EXPECT_THROW(w.row({"1"}), Error);
}

TEST(Files, AtomicWriteLeavesNoPartFile) {
  const auto dir = std::filesystem::temp_directory_path() / "hfspec_io_test";
  std::filesystem::remove_all(dir);
  write_text_file(dir / "a.txt", "hello\n");
  EXPECT_EQ(read_text_file(dir / "a.txt"), "hello\n");
  EXPECT_FALSE(std::filesystem::exists(dir / "a.txt.part"));
  EXPECT_THROW(read_text_file(dir / "missing.txt"), InputError);
  std::filesystem::remove_all(dir);
}

TEST(Manifest, Sha256KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Manifest, DeterministicWithoutTimestamp) {
  auto build = [] {
    RunManifest m("levels");
    m.add_input("config", testing::data_path("optics.json"));
    m.set("threads", 1LL);
    m.set("field", std::string("0,230,0"));
    return m.to_json();
  };
  EXPECT_EQ(build(), build());
  EXPECT_NE(build().find("sha256"), std::string::npos);
}

}  // namespace
}  // namespace hfspec
