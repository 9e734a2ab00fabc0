#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "sacode/csv.hpp"
#include "sacode/report.hpp"
#include "support.hpp"

using namespace sacode;
using nlohmann::json;
using test::rec;

namespace {

const CodingTree& def() { return CodingTree::default_tree(); }

BundleMetadata meta() {
  BundleMetadata m;
  m.dataset_hash = "d";
  m.generated_at = "2020-01-01T00:00:00Z";
  return m;
}

// 760 SS items, 315 of them T-agreements.
json ss_bundle() {
  CoderRecordSet a{"C1", {}, true};
  CoderRecordSet b{"C2", {}, true};
  for (int i = 1; i <= 760; ++i) {
    a.records.push_back(rec(def(), i, {"P4"}, "C1"));
    b.records.push_back(rec(def(), i, {i <= 315 ? "P4" : "P5"}, "C2"));
  }
  return make_bundle(analyze(a, b, test::items(760, "UK-2"), def()), def(), meta());
}

json small_bundle() {
  std::mt19937 rng(3);
  auto [a, b] = test::random_sets(def(), 80, rng, 0.4);
  Dataset d = test::items(80);
  for (auto& item : d) item.category = "UK-" + std::to_string(item.index % 13 + 1);
  return make_bundle(analyze(a, b, d, def()), def(), meta());
}

const Document& doc(const std::vector<Document>& docs, const std::string& name) {
  for (const auto& d : docs) {
    if (d.name == name) return d;
  }
  throw std::runtime_error("no document " + name);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(Report, Formats) {
  EXPECT_EQ(table_format_from_string("txt"), TableFormat::kText);
  EXPECT_EQ(table_format_from_string("markdown"), TableFormat::kMarkdown);
  EXPECT_EQ(table_format_from_string("csv"), TableFormat::kCsv);
  EXPECT_THROW(table_format_from_string("xlsx"), ReportError);
  EXPECT_EQ(extension(TableFormat::kMarkdown), "md");
}

TEST(Report, HeatBands) {
  for (int p = 0; p <= 100; ++p) {
    int expect = 0;
    if (p > 0) {
      expect = 1;
      while (p > 5 * expect) ++expect;
      expect = std::min(expect, 13);
    }
    EXPECT_EQ(heat_band(p), expect) << p;
  }
  EXPECT_EQ(band_letter(1), 'A');
  EXPECT_EQ(band_letter(13), 'M');
  EXPECT_EQ(band_grey(0), 255);
  EXPECT_EQ(band_grey(1), 200);
  EXPECT_EQ(band_grey(13), 80);
}

TEST(Report, SummaryCells) {
  const json b = ss_bundle();
  const std::string txt = doc(render_tables(b, TableFormat::kText), "tables/summary.txt").content;
  EXPECT_NE(txt.find("315 (41% of 760)"), std::string::npos) << txt;
  const std::string md = doc(render_tables(b, TableFormat::kMarkdown), "tables/summary.md").content;
  EXPECT_NE(md.find("| SS |"), std::string::npos) << md;
  const auto rows = csv::parse(doc(render_tables(b, TableFormat::kCsv), "tables/summary.csv").content);
  ASSERT_GE(rows.size(), 2u);
  EXPECT_EQ(rows[0][0], "Type");
}

TEST(Report, MatrixDashesAndDiagonal) {
  const json b = ss_bundle();
  const auto rows = csv::parse(doc(render_tables(b, TableFormat::kCsv), "tables/tag_vs_tag_ss.csv").content);
  const auto& header = rows[0];
  const auto col = [&](const std::string& code) {
    return static_cast<std::size_t>(std::find(header.begin(), header.end(), code) - header.begin());
  };
  for (const auto& r : rows) {
    if (r.size() < header.size()) continue;
    if (r[0] == "P4") {
      EXPECT_EQ(r[col("P4")], "*");
      EXPECT_EQ(r[col("P5")], "445");
      EXPECT_EQ(r[col("M1")], "--");
      EXPECT_EQ(r.back(), "445");
    }
    if (r[0] == "Sum") EXPECT_EQ(r.back(), "445");
  }
}

TEST(Report, DDPlaceholder) {
  const json b = ss_bundle();
  EXPECT_NE(doc(render_tables(b, TableFormat::kText), "tables/dd_items.txt").content.find("no DD items"),
            std::string::npos);
  const json s = small_bundle();
  ASSERT_FALSE(s["dd"].empty());
  const std::string dd = doc(render_tables(s, TableFormat::kText), "tables/dd_items.txt").content;
  EXPECT_EQ(dd.find("no DD items"), std::string::npos);
  EXPECT_NE(dd.find("A_2"), std::string::npos);
}

TEST(Report, CategoryBandsInCsv) {
  const json b = small_bundle();
  const auto rows = csv::parse(doc(render_tables(b, TableFormat::kCsv), "tables/categories.csv").content);
  ASSERT_GT(rows.size(), 2u);
  EXPECT_EQ(rows[0][2], "Measure");
  bool saw_band = false;
  for (const auto& r : rows) {
    if (r.size() > 2 && r[2] == "band") saw_band = true;
  }
  EXPECT_TRUE(saw_band);
}

TEST(Report, Deterministic) {
  const json b = small_bundle();
  for (TableFormat f : {TableFormat::kText, TableFormat::kCsv, TableFormat::kMarkdown}) {
    const auto x = render_tables(b, f);
    const auto y = render_tables(json::parse(b.dump()), f);
    ASSERT_EQ(x.size(), y.size());
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(x[i].content, y[i].content) << x[i].name;
  }
  const auto fx = render_figures(b);
  const auto fy = render_figures(b);
  for (std::size_t i = 0; i < fx.size(); ++i) EXPECT_EQ(fx[i].content, fy[i].content);
}

TEST(Report, TimestampHonorsSourceDateEpoch) {
  ::setenv("SOURCE_DATE_EPOCH", "0", 1);
  EXPECT_EQ(report_timestamp(), "1970-01-01T00:00:00Z");
  ::unsetenv("SOURCE_DATE_EPOCH");
}

TEST(Report, EmptyDatasetBanner) {
  const CoderRecordSet e{"C1", {}, true};
  const CoderRecordSet f{"C2", {}, true};
  const json b = make_bundle(analyze(e, f, {}, def()), def(), meta());
  const auto figs = render_figures(b);
  EXPECT_EQ(figs.size(), 6u);
  for (const auto& fig : figs) {
    EXPECT_NE(fig.content.find("No advice items"), std::string::npos) << fig.name;
    EXPECT_EQ(fig.content.rfind("<svg", 0), 0u) << fig.name;
  }
  EXPECT_NO_THROW(render_tables(b, TableFormat::kMarkdown));
}

TEST(Report, CheckBundle) {
  json b = small_bundle();
  EXPECT_NO_THROW(check_bundle(b));
  b.erase("q_tally");
  EXPECT_THROW(check_bundle(b), ReportError);
  EXPECT_THROW(render_tables(b, TableFormat::kText), ReportError);
}

TEST(Report, WriteReportLayout) {
  const auto dir = std::filesystem::temp_directory_path() / ("sacode_report_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  const json b = small_bundle();
  const auto written = write_report(dir, b, {TableFormat::kText, TableFormat::kCsv});
  EXPECT_EQ(written.size(), 9u * 2 + 6 + 1);
  EXPECT_TRUE(std::filesystem::exists(dir / "tables" / "q_tally.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "figures" / "agreement_tree.svg"));
  EXPECT_FALSE(std::filesystem::exists(dir / "tables" / "q_tally.md"));
  EXPECT_EQ(json::parse(slurp(dir / "bundle.json")), b);

  // Re-rendering from the written bundle reproduces every table byte for byte.
  const json back = json::parse(slurp(dir / "bundle.json"));
  for (const auto& d : render_tables(back, TableFormat::kCsv)) EXPECT_EQ(slurp(dir / d.name), d.content) << d.name;
  std::filesystem::remove_all(dir);
}

TEST(Report, BundleCarriesTreeAndMetadata) {
  const json b = small_bundle();
  EXPECT_EQ(b["metadata"]["tree_hash"], def().hash());
  EXPECT_EQ(b["metadata"]["coder_ids"], json::array({"A", "B"}));
  EXPECT_EQ(b["tree"]["root"], "Q1");
  EXPECT_EQ(b["tree"]["questions"].size(), 10u);
}
