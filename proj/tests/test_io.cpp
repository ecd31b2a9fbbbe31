#include "predframe/io.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace predframe;

TEST(Csv, ParsesSimpleFile) {
  std::istringstream in("t,x\n1,1.0\n2,0.5\n3,0.25\n");
  const auto s = read_series(in);
  EXPECT_EQ(s.values(), (std::vector<double>{1.0, 0.5, 0.25}));
  EXPECT_EQ(s.t0(), 1);
}

TEST(Csv, GapNamesLine) {
  std::istringstream in("t,x\n1,1.0\n3,0.5\n");
  try {
    read_series(in);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line, 3u);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(Csv, HeaderOnlyIsEmptySeries) {
  std::istringstream in("t,x\n");
  try {
    read_series(in);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("empty series"), std::string::npos);
  }
}

TEST(Csv, RejectsNonNumericAndMissingColumns) {
  std::istringstream bad("t,x\n1,abc\n");
  EXPECT_THROW(read_series(bad), ParseError);
  std::istringstream nocol("t,y\n1,2\n");
  EXPECT_THROW(read_series(nocol), ParseError);
  std::istringstream empty("");
  EXPECT_THROW(read_series(empty), ParseError);
  std::istringstream other("t,y\n5,2\n6,3\n");
  const auto s = read_series(other, "y");
  EXPECT_EQ(s.t0(), 5);
  EXPECT_EQ(s.size(), 2u);
}

TEST(Csv, RoundTripIsExact) {
  const auto x = simulate(ParamVector::garch11(0.1, 0.1, 0.8), {}, 2000, 3);
  std::stringstream buf;
  write_series(buf, x);
  const auto y = read_series(buf);
  ASSERT_EQ(y.size(), x.size());
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y.values()[i], x.values()[i]);
}

TEST(Json, IntervalSchema) {
  const auto x = simulate(ParamVector::ar1(0.5), {}, 1000, 2);
  const auto ci = ci_sample_split(ModelKind::AR1, x, make_split_plan(1000), 0.9);
  const auto j = to_json(ci, ModelKind::AR1);
  EXPECT_EQ(j.at("schema_version"), 1);
  EXPECT_EQ(j.at("scheme"), "spl");
  EXPECT_EQ(j.at("T_E"), 749);
  EXPECT_EQ(j.at("T_P"), 969);
  for (const char* k : {"center", "lower", "upper", "v_hat"}) EXPECT_TRUE(j.contains(k)) << k;
}
