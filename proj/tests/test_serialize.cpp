#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <regex>
#include <string>

#include <nlohmann/json.hpp>

#include "ngc/serialize.hpp"

TEST(Serialize, RoundTripIsBitExact) {
  for (int n : {1, 4, 8, 11})
    for (unsigned seed : {0u, 42u, 1234567u}) {
      const auto code = ngc::build_ngc(n, n - 1, seed);
      const auto back = ngc::from_json(ngc::to_json(code));
      EXPECT_TRUE(back == code) << "n=" << n << " seed=" << seed;
    }
}

TEST(Serialize, DocumentLayout) {
  const auto code = ngc::build_ngc(8, 3, 42);
  const auto doc = nlohmann::json::parse(ngc::to_json(code));
  EXPECT_EQ(doc.at("n").get<int>(), 8);
  EXPECT_EQ(doc.at("s_max").get<int>(), 3);
  EXPECT_EQ(doc.at("seed").get<std::uint64_t>(), 42u);
  ASSERT_EQ(doc.at("components").size(), 4u);
  for (int s = 0; s <= 3; ++s) {
    const auto& c = doc.at("components")[static_cast<std::size_t>(s)];
    EXPECT_EQ(c.at("sigma").get<int>(), s);
    ASSERT_EQ(c.at("entries").size(), 64u);
    // Row-major: entry (r, j) at r * n + j.
    EXPECT_EQ(c.at("entries")[8 + 1].get<double>(), code.component(s).entries()(1, 1));
    EXPECT_EQ(c.at("entries")[2 * 8 + 7].get<double>(), code.component(s).entries()(2, 7));
  }
}

TEST(Serialize, EntriesCarrySeventeenSignificantDigits) {
  const auto text = ngc::to_json(ngc::build_ngc(4, 2, 3));
  const std::regex number(R"(-?\d\.(\d+)e[+-]\d+)");
  std::size_t count = 0;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), number); it != std::sregex_iterator(); ++it) {
    EXPECT_EQ((*it)[1].length(), 16);
    ++count;
  }
  EXPECT_EQ(count, 3u * 16u + (1u + 2u) * 4u);
}

TEST(Serialize, FileRoundTrip) {
  const auto path = (std::filesystem::temp_directory_path() / "ngc_serialize_test.json").string();
  const auto code = ngc::build_ngc(6, 4, 8);
  ngc::save_code(code, path);
  EXPECT_TRUE(ngc::load_code(path) == code);
  std::remove(path.c_str());
}

TEST(Serialize, RejectsMalformedDocuments) {
  EXPECT_THROW(ngc::from_json("not json"), ngc::InvalidArgument);
  EXPECT_THROW(ngc::from_json(R"({"format": "other"})"), ngc::InvalidArgument);
  EXPECT_THROW(ngc::from_json(R"({"format": "ngc-code", "n": 2, "s_max": 0, "seed": 1,
                                  "components": [{"sigma": 0, "entries": [1, 0, 0]}]})"),
               ngc::InvalidArgument);
  EXPECT_THROW(ngc::from_json(R"({"format": "ngc-code", "n": 2, "s_max": 1, "seed": 1,
                                  "components": [{"sigma": 0, "entries": [1, 0, 0, 1]}]})"),
               ngc::InvalidArgument);
  EXPECT_THROW(ngc::load_code("/nonexistent/dir/code.json"), ngc::InvalidArgument);
}
