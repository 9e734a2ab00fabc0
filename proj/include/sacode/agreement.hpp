#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sacode/records.hpp"
#include "sacode/tree.hpp"

namespace sacode {

enum class ComparisonType { kSS = 0, kSD = 1, kDD = 2 };
inline constexpr std::array<ComparisonType, 3> kComparisonTypes = {ComparisonType::kSS, ComparisonType::kSD,
                                                                   ComparisonType::kDD};
std::string to_string(ComparisonType t);

enum class Pairing { kFirstFirst = 0, kFirstSecond = 1, kSecondSecond = 2 };
std::string to_string(Pairing p);

/// Integer percentage with half-up rounding; 0 when the denominator is 0.
int round_percent(std::size_t numerator, std::size_t denominator);

class AnalysisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TAgreement {
  bool agreed = false;
  std::optional<std::string> code;  // coder A's matching code
  std::optional<Pairing> pairing;
  std::size_t position_a = 0;
  std::size_t position_b = 0;
};

struct Divergence {
  std::string question;
  std::size_t overlap = 0;  // length of the shared prefix, split node included
  std::string code_a;
  std::string code_b;
  bool anomaly = false;  // equal-length overlaps ending at different nodes
};

struct ComparisonResult {
  int item_index = 0;
  ComparisonType type = ComparisonType::kSS;
  bool t_agreement = false;
  std::optional<std::string> agreed_code;
  std::optional<Pairing> pairing;
  std::optional<std::string> diverging_question;
  bool actionability_agreement = false;
  bool anomaly = false;
};

ComparisonType classify_comparison(const TagRecord& a, const TagRecord& b);
TAgreement t_agreement(const TagRecord& a, const TagRecord& b, const CodingTree& tree);
/// Only for SS or SD T-nonagreements; throws AnalysisError otherwise.
Divergence diverging_question(const TagRecord& a, const TagRecord& b, const CodingTree& tree);
bool actionability_agreement(const TagRecord& a, const TagRecord& b, const CodingTree& tree);
ComparisonResult compare_item(const TagRecord& a, const TagRecord& b, const CodingTree& tree);

/// Pairs the two coders' records by item index. Throws AnalysisError when an
/// item is coded by only one of them.
std::vector<std::pair<const TagRecord*, const TagRecord*>> align(const CoderRecordSet& a, const CoderRecordSet& b);

struct QuestionCounts {
  std::size_t visits = 0;
  std::size_t q_agreements = 0;
  std::size_t yes_agreements = 0;  // subset of q_agreements where both answered yes
  std::size_t q_nonagreements = 0;
  friend bool operator==(const QuestionCounts&, const QuestionCounts&) = default;
};

/// Per-question joint visits split by comparison type. DD is never populated.
struct QTally {
  std::vector<std::string> questions;
  std::map<std::string, std::array<QuestionCounts, 3>> counts;
  std::array<std::size_t, 3> excluded_anomalies{};

  const QuestionCounts& at(const std::string& question, ComparisonType t) const;
  std::size_t total_nonagreements(ComparisonType t) const;
  /// Share of all Q-nonagreements of this type that occur at `question`, in percent.
  double share(const std::string& question, ComparisonType t) const;
  /// Q-nonagreements at `question` relative to its joint visits, in percent.
  double within(const std::string& question, ComparisonType t) const;
};

QTally q_tally(const CoderRecordSet& a, const CoderRecordSet& b, const CodingTree& tree);

/// Code x code counts of nonagreeing pairs; rows are coder A, columns coder B.
struct TagVsTagMatrix {
  ComparisonType type = ComparisonType::kSS;
  std::vector<std::string> codes;
  std::vector<std::vector<std::size_t>> counts;

  std::size_t at(const std::string& row, const std::string& col) const;
  std::size_t row_sum(const std::string& row) const;
  std::size_t column_sum(const std::string& col) const;
  std::size_t total() const;
};

TagVsTagMatrix tag_vs_tag(const CoderRecordSet& a, const CoderRecordSet& b, const CodingTree& tree, ComparisonType type);

struct TagDistribution {
  std::string coder_id;
  std::vector<std::string> codes;
  std::map<std::string, std::size_t> counts;
  std::size_t items = 0;
  std::size_t total_tags = 0;
  std::size_t second_tags = 0;
  std::size_t actionable_items = 0;
  std::size_t non_actionable_items = 0;
};

TagDistribution tag_distribution(const CoderRecordSet& set, const CodingTree& tree);

struct CategoryTable {
  std::vector<std::string> categories;
  std::vector<std::string> codes;
  std::vector<std::string> coder_ids;
  std::map<std::string, std::size_t> sizes;
  // counts[coder][code][category]: items in the category carrying the code.
  std::vector<std::map<std::string, std::map<std::string, std::size_t>>> counts;
  std::vector<std::map<std::string, std::size_t>> actionable;  // [coder][category]
  std::size_t uncategorized = 0;

  int percent(std::size_t coder, const std::string& code, const std::string& category) const;
  int actionable_percent(std::size_t coder, const std::string& category) const;
  int actionability_delta(const std::string& category) const;
};

CategoryTable category_distribution(const CoderRecordSet& a, const CoderRecordSet& b, const Dataset& dataset,
                                    const CodingTree& tree);

struct UnfocusedBreakdown {
  std::string code = "M1";
  std::string label = kUnfocused;
  // [SS, SD] buckets.
  std::array<std::size_t, 2> both{};
  std::array<std::size_t, 2> exactly_one{};
  std::array<std::size_t, 2> neither{};

  std::size_t total() const;
};

UnfocusedBreakdown unfocused_breakdown(const CoderRecordSet& a, const CoderRecordSet& b, const CodingTree& tree,
                                       const std::string& code = "M1", const std::string& label = kUnfocused);

struct DDRow {
  int item_index = 0;
  std::array<std::string, 2> a;
  std::array<std::string, 2> b;
};

std::vector<DDRow> dd_listing(const CoderRecordSet& a, const CoderRecordSet& b, const CodingTree& tree);

struct TypeSummary {
  std::size_t items = 0;
  std::size_t t_agreements = 0;
  std::size_t actionability_agreements = 0;
  std::array<std::size_t, 3> pairings{};
};

struct Summary {
  std::array<TypeSummary, 3> by_type{};
  std::size_t items = 0;
  std::size_t t_agreements = 0;
  std::size_t actionability_agreements = 0;
  std::size_t anomalies = 0;

  const TypeSummary& operator[](ComparisonType t) const { return by_type[static_cast<std::size_t>(t)]; }
  int overall_agreement_percent() const { return round_percent(t_agreements, items); }
};

Summary summary(const CoderRecordSet& a, const CoderRecordSet& b, const CodingTree& tree);

/// Every engine product for one pair of coders.
struct Analysis {
  std::string coder_a;
  std::string coder_b;
  std::vector<ComparisonResult> comparisons;
  Summary summary;
  QTally tally;
  TagVsTagMatrix ss_matrix;
  TagVsTagMatrix sd_matrix;
  std::array<TagDistribution, 2> distributions;
  CategoryTable categories;
  UnfocusedBreakdown unfocused;
  std::vector<DDRow> dd;
  std::vector<std::string> warnings;
};

Analysis analyze(const CoderRecordSet& a, const CoderRecordSet& b, const Dataset& dataset, const CodingTree& tree);

nlohmann::json to_json(const ComparisonResult& r);
nlohmann::json to_json(const Summary& s);
nlohmann::json to_json(const QTally& t);
nlohmann::json to_json(const TagVsTagMatrix& m);
nlohmann::json to_json(const TagDistribution& d);
nlohmann::json to_json(const CategoryTable& c);
nlohmann::json to_json(const UnfocusedBreakdown& u);
nlohmann::json to_json(const std::vector<DDRow>& rows);
nlohmann::json to_json(const Analysis& a);

}  // namespace sacode
