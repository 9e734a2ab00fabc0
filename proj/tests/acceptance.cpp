// Acceptance runner: one PASS/FAIL/SKIP line per criterion.
//   sacode_acceptance               everything
//   sacode_acceptance --standalone  property suite and reference-table checks only
//   sacode_acceptance --dataset     dataset criteria only; exits 77 when no dataset is configured
//
// Dataset criteria read SACODE_TWOCODER_DATASET (CSV or JSON), with optional
// SACODE_TWOCODER_MAPPING (column mapping JSON) and SACODE_TWOCODER_TREE.

#include <gtest/gtest.h>

#include <chrono>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <sstream>

#include "sacode/agreement.hpp"
#include "sacode/ingest.hpp"

using namespace sacode;
using CT = ComparisonType;

namespace {

struct Check {
  std::vector<std::string> failures;

  template <typename A, typename B>
  void eq(const std::string& what, const A& got, const B& want) {
    if (!(got == want)) {
      std::ostringstream s;
      s << what << ": got " << got << ", expected " << want;
      failures.push_back(s.str());
    }
  }
  void near(const std::string& what, int got, int want, int tol) {
    if (std::abs(got - want) > tol) {
      failures.push_back(what + ": got " + std::to_string(got) + "%, expected " + std::to_string(want) + "% +/-" +
                         std::to_string(tol));
    }
  }
  void truth(const std::string& what, bool ok) {
    if (!ok) failures.push_back(what);
  }
};

struct Outcome {
  int failed = 0;
  int skipped = 0;
};

void report(Outcome& out, const std::string& label, const Check& c, const std::string& detail = "") {
  const bool ok = c.failures.empty();
  std::cout << (ok ? "[PASS] " : "[FAIL] ") << label << (detail.empty() ? "" : " (" + detail + ")") << "\n";
  for (const auto& f : c.failures) std::cout << "         " << f << "\n";
  if (!ok) ++out.failed;
}

void skip(Outcome& out, const std::string& label, const std::string& why) {
  std::cout << "[SKIP] " << label << " (" << why << ")\n";
  ++out.skipped;
}

const std::vector<std::string> kCodes = {"M1", "M2", "N", "P1", "P2", "P3", "P4", "P5", "P6", "T", "T'"};

// Rows are the first coder, columns the second; diagonal cells are unused.
const std::vector<std::vector<std::size_t>> kSSMatrix = {
    {0, 3, 5, 21, 19, 0, 33, 12, 0, 36, 3},  {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0},   {2, 0, 0, 2, 0, 0, 0, 0, 0, 7, 0},
    {11, 0, 12, 0, 16, 1, 24, 9, 0, 61, 4},  {6, 4, 0, 3, 0, 0, 2, 11, 0, 21, 0}, {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0},
    {1, 0, 5, 16, 1, 0, 0, 11, 0, 13, 0},    {0, 0, 2, 7, 6, 0, 25, 0, 0, 3, 0},  {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0},
    {4, 0, 0, 6, 5, 0, 2, 4, 0, 0, 5},       {0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0}};
const std::vector<std::size_t> kSSRowSums = {132, 0, 11, 138, 47, 0, 47, 43, 0, 26, 1};
const std::vector<std::size_t> kSSColumnSums = {24, 7, 24, 55, 47, 1, 86, 47, 0, 142, 12};

const std::vector<std::vector<std::size_t>> kSDMatrix = {
    {0, 0, 0, 9, 2, 0, 15, 4, 0, 1, 0},      {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0},    {0, 0, 0, 2, 1, 0, 1, 0, 0, 1, 0},
    {3, 0, 6, 0, 10, 2, 7, 17, 1, 17, 5},    {2, 2, 0, 2, 0, 0, 0, 2, 0, 4, 0},    {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0},
    {3, 0, 4, 7, 8, 1, 0, 11, 0, 12, 2},     {1, 0, 3, 7, 3, 0, 5, 0, 0, 10, 0},   {0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0},
    {1, 0, 1, 3, 0, 0, 4, 3, 0, 0, 2},       {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}};
const std::vector<std::size_t> kSDRowSums = {31, 0, 5, 68, 12, 0, 48, 29, 1, 14, 0};
const std::vector<std::size_t> kSDColumnSums = {10, 2, 14, 30, 24, 3, 33, 37, 1, 45, 9};

const std::vector<int> kDDItems = {24, 67, 130, 165, 292, 317, 324, 404, 465, 519, 534, 543, 551, 680, 686, 691, 734, 787, 801};
const std::vector<std::vector<std::string>> kDDTags = {
    {"P5", "T", "P4", "P4", "P4", "P4", "P4", "P4", "N", "P2", "P5", "P2", "P1", "P1", "P1", "P4", "P5", "P4", "P1"},
    {"P4", "P5", "P1", "P1", "P5", "P1", "P5", "P5", "M1", "P1", "P4", "P1", "P4", "P4", "P4", "P1", "P4", "P1", "P4"},
    {"P2", "P1", "T", "P5", "P1", "P1", "P4", "P5", "N", "T", "P1", "P2", "P4", "P5", "P5", "P1", "P1", "P4", "P1"},
    {"P1", "P4", "P1", "P4", "P4", "P4", "P1", "P4", "M1", "P2", "P4", "T", "P1", "P4", "P4", "P4", "P4", "P1", "P4"}};

Tag tag(const CodingTree& tree, const std::string& code) { return Tag{code, tree.tag_to_sequence(code), {}}; }

TagRecord record(const CodingTree& tree, int ix, const std::string& coder, std::vector<std::string> codes) {
  TagRecord r;
  r.item_index = ix;
  r.coder_id = coder;
  for (const auto& c : codes) r.tags.push_back(tag(tree, c));
  return r;
}

void matrix_cells(Check& c, const TagVsTagMatrix& m, const std::vector<std::vector<std::size_t>>& want,
                  const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols, const std::string& name) {
  c.eq(name + " codes", m.codes.size(), kCodes.size());
  if (m.codes != kCodes) {
    c.truth(name + " code order differs from the reference", false);
    return;
  }
  for (std::size_t i = 0; i < kCodes.size(); ++i) {
    for (std::size_t j = 0; j < kCodes.size(); ++j) {
      if (i != j) c.eq(name + "(" + kCodes[i] + "," + kCodes[j] + ")", m.counts[i][j], want[i][j]);
    }
    c.eq(name + " row " + kCodes[i], m.row_sum(kCodes[i]), rows[i]);
    c.eq(name + " column " + kCodes[i], m.column_sum(kCodes[i]), cols[i]);
  }
}

// --- always-on ---------------------------------------------------------------

void property_suite(Outcome& out) {
  ::testing::GTEST_FLAG(filter) = "Property.*";
  auto& listeners = ::testing::UnitTest::GetInstance()->listeners();
  delete listeners.Release(listeners.default_result_printer());
  const auto t0 = std::chrono::steady_clock::now();
  const int rc = RUN_ALL_TESTS();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  Check c;
  const auto* unit = ::testing::UnitTest::GetInstance();
  for (int i = 0; i < unit->total_test_suite_count(); ++i) {
    const auto* suite = unit->GetTestSuite(i);
    for (int j = 0; j < suite->total_test_count(); ++j) {
      const auto* info = suite->GetTestInfo(j);
      if (info->should_run() && info->result()->Failed()) c.truth(std::string("property failed: ") + info->name(), false);
    }
  }
  c.truth("property suite returned " + std::to_string(rc), rc == 0);
  c.truth("property suite ran no tests", unit->test_to_run_count() > 0);
  c.truth("runtime over 30 s", secs < 30.0);
  std::ostringstream detail;
  detail.precision(2);
  detail << std::fixed << unit->successful_test_count() << "/" << unit->test_to_run_count() << " properties, " << secs
         << " s";
  report(out, "criterion 11: property suite", c, detail.str());
}

// The SS reference matrix is a complete list of SS nonagreeing code pairs, so
// replaying it through the engine must give the reference diverging-question shares.
void reference_ss_matrix(Outcome& out) {
  const CodingTree& tree = CodingTree::default_tree();
  CoderRecordSet a{"C1", {}, true}, b{"C2", {}, true};
  int ix = 0;
  for (std::size_t i = 0; i < kCodes.size(); ++i) {
    for (std::size_t j = 0; j < kCodes.size(); ++j) {
      for (std::size_t n = 0; n < kSSMatrix[i][j]; ++n) {
        ++ix;
        a.records.push_back(record(tree, ix, "C1", {kCodes[i]}));
        b.records.push_back(record(tree, ix, "C2", {kCodes[j]}));
      }
    }
  }
  Check c;
  const auto m = tag_vs_tag(a, b, tree, CT::kSS);
  matrix_cells(c, m, kSSMatrix, kSSRowSums, kSSColumnSums, "SS");
  c.eq("SS total", m.total(), 445u);
  const QTally t = q_tally(a, b, tree);
  c.eq("SS Q-nonagreements", t.total_nonagreements(CT::kSS), 445u);
  auto share = [&](const char* q) { return round_percent(t.at(q, CT::kSS).q_nonagreements, t.total_nonagreements(CT::kSS)); };
  c.near("Q1 share", share("Q1"), 35, 1);
  c.near("Q3 share", share("Q3"), 29, 1);
  c.near("Q4 share", share("Q4"), 14, 1);
  c.near("Q8 share", share("Q8"), 8, 1);
  c.near("Q6 share", share("Q6"), 0, 1);
  report(out, "check: reference SS matrix replays to the reference Q1/Q3/Q4/Q8 shares", c);
}

void reference_dd_items(Outcome& out) {
  const CodingTree& tree = CodingTree::default_tree();
  CoderRecordSet a{"C1", {}, true}, b{"C2", {}, true};
  for (std::size_t k = 0; k < kDDItems.size(); ++k) {
    a.records.push_back(record(tree, kDDItems[k], "C1", {kDDTags[0][k], kDDTags[1][k]}));
    b.records.push_back(record(tree, kDDItems[k], "C2", {kDDTags[2][k], kDDTags[3][k]}));
  }
  const Summary s = summary(a, b, tree);
  Check c;
  c.eq("DD items", s[CT::kDD].items, 19u);
  c.eq("DD T-agreements", s[CT::kDD].t_agreements, 17u);
  c.eq("DD actionability agreements", s[CT::kDD].actionability_agreements, 18u);
  c.eq("DD First-First", s[CT::kDD].pairings[0], 5u);
  c.eq("DD First-Second", s[CT::kDD].pairings[1], 7u);
  c.eq("DD Second-Second", s[CT::kDD].pairings[2], 5u);
  c.eq("DD listing rows", dd_listing(a, b, tree).size(), 19u);
  report(out, "check: reference DD items give 17 T-agreements, 18 actionability agreements, pairing 5/7/5", c);
}

// --- dataset-bound -------------------------------------------------------------

struct Loaded {
  CodingTree tree = CodingTree::default_tree();
  Dataset dataset;
  CoderRecordSet a, b;
  Analysis analysis;
  ValidationReport findings;
  double seconds = 0;
};

std::string env(const char* name) {
  const char* v = std::getenv(name);
  return v ? v : "";
}

Loaded load_dataset(const std::string& path) {
  Loaded l;
  const auto t0 = std::chrono::steady_clock::now();
  if (const std::string tree = env("SACODE_TWOCODER_TREE"); !tree.empty()) l.tree = CodingTree::load(tree);
  const std::string mapping_path = env("SACODE_TWOCODER_MAPPING");
  const ColumnMapping mapping = mapping_path.empty() ? ColumnMapping::canonical() : ColumnMapping::load(mapping_path);
  const Table table = load_table(path);
  l.dataset = parse_dataset(table, mapping);
  auto sets = parse_codings(table, mapping, l.tree);
  if (sets.size() < 2) throw IngestError("the mapping must name two coders");
  l.a = sets[0];
  l.b = sets[1];
  l.findings = validate_records({l.a, l.b}, l.dataset, l.tree);
  l.analysis = analyze(l.a, l.b, l.dataset, l.tree);
  l.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return l;
}

const char* kLabels[] = {
    "criterion 1: comparison partition 760/234/19",
    "criterion 2: T-agreements 315/130/17, overall 46%",
    "criterion 3: actionability agreements 608/204/18",
    "criterion 4: Q-tallies and diverging-question shares",
    "criterion 5: SS and SD tag-vs-tag matrices",
    "criterion 6: tag distribution and actionable proportions",
    "criterion 7: ordered pairing SD 78/52, DD 5/7/5",
    "criterion 8: DD listing of 19 items",
    "criterion 9: Unfocused breakdown on M1 agreements",
    "criterion 10: category table cells and UK-9 actionability delta",
};

void dataset_criteria(Outcome& out) {
  const std::string path = env("SACODE_TWOCODER_DATASET");
  if (path.empty()) {
    for (const char* l : kLabels) skip(out, l, "SACODE_TWOCODER_DATASET is not set");
    return;
  }
  Loaded d;
  try {
    d = load_dataset(path);
  } catch (const std::exception& e) {
    Check c;
    c.truth(std::string("cannot load dataset: ") + e.what(), false);
    for (const char* l : kLabels) report(out, l, c);
    return;
  }
  const Analysis& an = d.analysis;
  const Summary& s = an.summary;
  const QTally& t = an.tally;

  {
    Check c;
    c.eq("records valid", d.findings.size(), 0u);
    c.eq("items", s.items, 1013u);
    c.eq("SS", s[CT::kSS].items, 760u);
    c.eq("SD", s[CT::kSD].items, 234u);
    c.eq("DD", s[CT::kDD].items, 19u);
    c.truth("analysis took over 5 s", d.seconds < 5.0);
    std::ostringstream detail;
    detail.precision(2);
    detail << std::fixed << "ingest and analysis " << d.seconds << " s";
    report(out, kLabels[0], c, detail.str());
  }
  {
    Check c;
    c.eq("SS", s[CT::kSS].t_agreements, 315u);
    c.eq("SD", s[CT::kSD].t_agreements, 130u);
    c.eq("DD", s[CT::kDD].t_agreements, 17u);
    c.eq("all", s.t_agreements, 462u);
    c.eq("overall %", s.overall_agreement_percent(), 46);
    report(out, kLabels[1], c);
  }
  {
    Check c;
    c.eq("SS", s[CT::kSS].actionability_agreements, 608u);
    c.eq("SD", s[CT::kSD].actionability_agreements, 204u);
    c.eq("DD", s[CT::kDD].actionability_agreements, 18u);
    report(out, kLabels[2], c);
  }
  {
    Check c;
    c.eq("SS Q-nonagreements", t.total_nonagreements(CT::kSS), 445u);
    c.eq("SD Q-nonagreements", t.total_nonagreements(CT::kSD), 104u);
    c.eq("Q1 SS visits", t.at("Q1", CT::kSS).visits, 760u);
    c.eq("Q1 SD visits", t.at("Q1", CT::kSD).visits, 234u);
    c.eq("Q2 SS visits", t.at("Q2", CT::kSS).visits, 508u);
    c.eq("Q2 SD visits", t.at("Q2", CT::kSD).visits, 206u);
    auto share = [&](const char* q, CT type) {
      return round_percent(t.at(q, type).q_nonagreements, t.total_nonagreements(type));
    };
    c.near("Q1 SS share", share("Q1", CT::kSS), 35, 1);
    c.near("Q1 SD share", share("Q1", CT::kSD), 17, 1);
    c.near("Q3 SS share", share("Q3", CT::kSS), 29, 1);
    c.near("Q3 SD share", share("Q3", CT::kSD), 23, 1);
    c.near("Q4 SS share", share("Q4", CT::kSS), 14, 1);
    c.near("Q4 SD share", share("Q4", CT::kSD), 25, 1);
    c.near("Q8 SS share", share("Q8", CT::kSS), 8, 1);
    c.near("Q8 SS within", round_percent(t.at("Q8", CT::kSS).q_nonagreements, t.at("Q8", CT::kSS).visits), 34, 1);
    report(out, kLabels[3], c);
  }
  {
    Check c;
    matrix_cells(c, an.ss_matrix, kSSMatrix, kSSRowSums, kSSColumnSums, "SS");
    c.eq("SS (P1,T)", an.ss_matrix.at("P1", "T"), 61u);
    c.eq("SS total", an.ss_matrix.total(), 445u);
    matrix_cells(c, an.sd_matrix, kSDMatrix, kSDRowSums, kSDColumnSums, "SD");
    c.eq("SD total", an.sd_matrix.total(), 208u);
    c.eq("SD row P1", an.sd_matrix.row_sum("P1"), 68u);
    c.eq("SD column T", an.sd_matrix.column_sum("T"), 45u);
    report(out, kLabels[4], c);
  }
  {
    Check c;
    const auto& [d1, d2] = an.distributions;
    c.eq("C1 tags", d1.total_tags, 1177u);
    c.eq("C2 tags", d2.total_tags, 1121u);
    c.eq("C1 T", d1.counts.at("T"), 97u);
    c.eq("C2 T", d2.counts.at("T"), 235u);
    c.eq("C1 P5", d1.counts.at("P5"), 139u);
    c.eq("C2 P5", d2.counts.at("P5"), 128u);
    c.eq("C1 N", d1.counts.at("N"), 35u);
    c.eq("C2 N", d2.counts.at("N"), 59u);
    c.near("C1 actionable", round_percent(d1.actionable_items, d1.items), 32, 1);
    c.near("C2 actionable", round_percent(d2.actionable_items, d2.items), 33, 1);
    report(out, kLabels[5], c);
  }
  {
    Check c;
    c.eq("SD First-First", s[CT::kSD].pairings[0], 78u);
    c.eq("SD First-Second", s[CT::kSD].pairings[1], 52u);
    c.eq("DD First-First", s[CT::kDD].pairings[0], 5u);
    c.eq("DD First-Second", s[CT::kDD].pairings[1], 7u);
    c.eq("DD Second-Second", s[CT::kDD].pairings[2], 5u);
    report(out, kLabels[6], c);
  }
  {
    Check c;
    c.eq("DD rows", an.dd.size(), kDDItems.size());
    for (std::size_t k = 0; k < std::min(an.dd.size(), kDDItems.size()); ++k) {
      const DDRow& r = an.dd[k];
      const std::string col = "item " + std::to_string(kDDItems[k]);
      c.eq(col + " index", r.item_index, kDDItems[k]);
      c.eq(col + " C1_1", r.a[0], kDDTags[0][k]);
      c.eq(col + " C1_2", r.a[1], kDDTags[1][k]);
      c.eq(col + " C2_1", r.b[0], kDDTags[2][k]);
      c.eq(col + " C2_2", r.b[1], kDDTags[3][k]);
    }
    report(out, kLabels[7], c);
  }
  {
    Check c;
    const UnfocusedBreakdown& u = an.unfocused;
    c.eq("both SS", u.both[0], 30u);
    c.eq("both SD", u.both[1], 2u);
    c.eq("one SS", u.exactly_one[0], 13u);
    c.eq("one SD", u.exactly_one[1], 3u);
    c.eq("neither SS", u.neither[0], 53u);
    c.eq("neither SD", u.neither[1], 5u);
    c.eq("total", u.total(), 106u);
    report(out, kLabels[8], c);
  }
  {
    Check c;
    const CategoryTable& ct = an.categories;
    const bool have = ct.sizes.count("UK-10") && ct.sizes.count("UK-9");
    c.truth("categories UK-9 and UK-10 present", have);
    if (have) {
      c.near("UK-10 M1 C1", ct.percent(0, "M1", "UK-10"), 49, 1);
      c.near("UK-10 M1 C2", ct.percent(1, "M1", "UK-10"), 29, 1);
      c.near("UK-10 T C1", ct.percent(0, "T", "UK-10"), 10, 1);
      c.near("UK-10 T C2", ct.percent(1, "T", "UK-10"), 28, 1);
      c.near("UK-9 actionability delta", ct.actionability_delta("UK-9"), 23, 1);
    }
    report(out, kLabels[9], c);
  }
}

}  // namespace

int main(int argc, char** argv) {
  ::testing::InitGoogleTest(&argc, argv);
  bool standalone = true, dataset = true;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--standalone") {
      dataset = false;
    } else if (a == "--dataset") {
      standalone = false;
    } else {
      std::cerr << "usage: " << argv[0] << " [--standalone | --dataset]\n";
      return 2;
    }
  }
  Outcome out;
  if (dataset) dataset_criteria(out);
  if (standalone) {
    property_suite(out);
    reference_ss_matrix(out);
    reference_dd_items(out);
  }
  std::cout << (out.failed ? "FAILED" : "OK") << ": " << out.failed << " failed, " << out.skipped << " skipped\n";
  if (out.failed) return 1;
  if (!standalone && out.skipped) return 77;
  return 0;
}
