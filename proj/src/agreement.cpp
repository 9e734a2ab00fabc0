#include "sacode/agreement.hpp"

#include <algorithm>
#include <set>

namespace sacode {

using nlohmann::json;

std::string to_string(ComparisonType t) {
  switch (t) {
    case ComparisonType::kSS: return "SS";
    case ComparisonType::kSD: return "SD";
    case ComparisonType::kDD: return "DD";
  }
  return "?";
}

std::string to_string(Pairing p) {
  switch (p) {
    case Pairing::kFirstFirst: return "First-First";
    case Pairing::kFirstSecond: return "First-Second";
    case Pairing::kSecondSecond: return "Second-Second";
  }
  return "?";
}

int round_percent(std::size_t numerator, std::size_t denominator) {
  if (denominator == 0) return 0;
  return static_cast<int>((200 * numerator + denominator) / (2 * denominator));
}

namespace {

std::size_t type_index(ComparisonType t) { return static_cast<std::size_t>(t); }

void require_same_item(const TagRecord& a, const TagRecord& b) {
  if (a.item_index != b.item_index) {
    throw AnalysisError("records for different items: " + std::to_string(a.item_index) + " vs " +
                        std::to_string(b.item_index));
  }
  if (a.tags.empty() || b.tags.empty() || a.tags.size() > 2 || b.tags.size() > 2) {
    throw AnalysisError("item " + std::to_string(a.item_index) + ": records must carry 1 or 2 tags");
  }
}

// Shared prefix of two root-to-leaf paths: the index of the first differing
// answer, i.e. the split node. Returns the path length when one contains the other.
std::size_t split_index(const QuestionSequence& x, const QuestionSequence& y) {
  const std::size_t n = std::min(x.n(), y.n());
  for (std::size_t i = 0; i < n; ++i) {
    if (x.nodes[i] != y.nodes[i] || x.answers[i] != y.answers[i]) return i;
  }
  return n;
}

bool actionable(const TagRecord& r, const CodingTree& tree) {
  return std::any_of(r.tags.begin(), r.tags.end(), [&](const Tag& t) { return tree.is_actionable(t.code); });
}

}  // namespace

ComparisonType classify_comparison(const TagRecord& a, const TagRecord& b) {
  require_same_item(a, b);
  const std::size_t doubles = (a.tags.size() == 2) + (b.tags.size() == 2);
  return doubles == 0 ? ComparisonType::kSS : doubles == 1 ? ComparisonType::kSD : ComparisonType::kDD;
}

TAgreement t_agreement(const TagRecord& a, const TagRecord& b, const CodingTree& tree) {
  require_same_item(a, b);
  // Position pairs in precedence order: First-First, then First-Second / Second-First, then Second-Second.
  static constexpr std::array<std::pair<std::size_t, std::size_t>, 4> kOrder = {{{0, 0}, {0, 1}, {1, 0}, {1, 1}}};
  for (const auto& [pa, pb] : kOrder) {
    if (pa >= a.tags.size() || pb >= b.tags.size()) continue;
    if (!tree.codes_equal(a.tags[pa].code, b.tags[pb].code)) continue;
    TAgreement r;
    r.agreed = true;
    r.code = tree.canonical(a.tags[pa].code);
    r.pairing = pa + pb == 0 ? Pairing::kFirstFirst : pa + pb == 1 ? Pairing::kFirstSecond : Pairing::kSecondSecond;
    r.position_a = pa;
    r.position_b = pb;
    return r;
  }
  return {};
}

Divergence diverging_question(const TagRecord& a, const TagRecord& b, const CodingTree& tree) {
  const ComparisonType type = classify_comparison(a, b);
  if (type == ComparisonType::kDD) throw AnalysisError("diverging questions are not defined for DD comparisons");
  if (t_agreement(a, b, tree).agreed) {
    throw AnalysisError("item " + std::to_string(a.item_index) + ": coders agree, there is no diverging question");
  }
  std::optional<Divergence> best;
  for (const auto& ta : a.tags) {
    for (const auto& tb : b.tags) {
      const QuestionSequence& sa = tree.analysis_sequence(tree.canonical(ta.code));
      const QuestionSequence& sb = tree.analysis_sequence(tree.canonical(tb.code));
      const std::size_t k = split_index(sa, sb);
      if (k >= sa.n() || k >= sb.n()) throw AnalysisError("paths to distinct codes must split");
      Divergence d{sa.nodes[k], k + 1, ta.code, tb.code, false};
      if (!best || d.overlap > best->overlap) {
        best = d;
      } else if (d.overlap == best->overlap && d.question != best->question) {
        best->anomaly = true;
      }
    }
  }
  return *best;
}

bool actionability_agreement(const TagRecord& a, const TagRecord& b, const CodingTree& tree) {
  require_same_item(a, b);
  if (a.tags.size() == 1 && b.tags.size() == 1) return actionable(a, tree) == actionable(b, tree);
  // SD and DD: any cross pair of tags with matching actionability.
  for (const auto& ta : a.tags) {
    for (const auto& tb : b.tags) {
      if (tree.is_actionable(ta.code) == tree.is_actionable(tb.code)) return true;
    }
  }
  return false;
}

ComparisonResult compare_item(const TagRecord& a, const TagRecord& b, const CodingTree& tree) {
  ComparisonResult r;
  r.item_index = a.item_index;
  r.type = classify_comparison(a, b);
  const TAgreement ag = t_agreement(a, b, tree);
  r.t_agreement = ag.agreed;
  r.agreed_code = ag.code;
  r.pairing = ag.pairing;
  r.actionability_agreement = actionability_agreement(a, b, tree);
  if (!ag.agreed && r.type != ComparisonType::kDD) {
    const Divergence d = diverging_question(a, b, tree);
    r.anomaly = d.anomaly;
    if (!d.anomaly) r.diverging_question = d.question;
  }
  return r;
}

std::vector<std::pair<const TagRecord*, const TagRecord*>> align(const CoderRecordSet& a, const CoderRecordSet& b) {
  std::map<int, const TagRecord*> by_index;
  for (const auto& r : b.records) by_index[r.item_index] = &r;
  std::vector<std::pair<const TagRecord*, const TagRecord*>> out;
  for (const auto& r : a.records) {
    auto it = by_index.find(r.item_index);
    if (it == by_index.end()) {
      throw AnalysisError("item " + std::to_string(r.item_index) + " is coded by " + a.coder_id + " but not " + b.coder_id);
    }
    out.emplace_back(&r, it->second);
    by_index.erase(it);
  }
  if (!by_index.empty()) {
    throw AnalysisError("item " + std::to_string(by_index.begin()->first) + " is coded by " + b.coder_id + " but not " +
                        a.coder_id);
  }
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.first->item_index < y.first->item_index; });
  return out;
}

const QuestionCounts& QTally::at(const std::string& question, ComparisonType t) const {
  static const QuestionCounts kZero;
  auto it = counts.find(question);
  return it == counts.end() ? kZero : it->second[type_index(t)];
}

std::size_t QTally::total_nonagreements(ComparisonType t) const {
  std::size_t n = 0;
  for (const auto& [q, c] : counts) n += c[type_index(t)].q_nonagreements;
  return n;
}

double QTally::share(const std::string& question, ComparisonType t) const {
  const std::size_t total = total_nonagreements(t);
  return total == 0 ? 0.0 : 100.0 * static_cast<double>(at(question, t).q_nonagreements) / static_cast<double>(total);
}

double QTally::within(const std::string& question, ComparisonType t) const {
  const QuestionCounts& c = at(question, t);
  return c.visits == 0 ? 0.0 : 100.0 * static_cast<double>(c.q_nonagreements) / static_cast<double>(c.visits);
}

QTally q_tally(const CoderRecordSet& a, const CoderRecordSet& b, const CodingTree& tree) {
  QTally tally;
  tally.questions = tree.analysis_questions();
  for (const auto& q : tally.questions) tally.counts[q] = {};

  auto credit_agreements = [&](const QuestionSequence& seq, std::size_t upto, std::size_t ti) {
    for (std::size_t i = 0; i < upto; ++i) {
      auto& c = tally.counts[seq.nodes[i]][ti];
      ++c.visits;
      ++c.q_agreements;
      if (seq.answers[i] == Answer::kYes) ++c.yes_agreements;
    }
  };

  for (const auto& [ra, rb] : align(a, b)) {
    const ComparisonType type = classify_comparison(*ra, *rb);
    if (type == ComparisonType::kDD) continue;
    const std::size_t ti = type_index(type);
    const TAgreement ag = t_agreement(*ra, *rb, tree);
    if (ag.agreed) {
      const std::string ca = tree.canonical(ra->tags[ag.position_a].code);
      const std::string cb = tree.canonical(rb->tags[ag.position_b].code);
      const QuestionSequence& sa = tree.analysis_sequence(ca);
      if (ca == cb) {
        credit_agreements(sa, sa.n(), ti);
      } else {
        // Equivalent but distinct codes (T vs T'): only the shared prefix was answered alike.
        credit_agreements(sa, split_index(sa, tree.analysis_sequence(cb)), ti);
      }
      continue;
    }
    const Divergence d = diverging_question(*ra, *rb, tree);
    if (d.anomaly) {
      ++tally.excluded_anomalies[ti];
      continue;
    }
    const QuestionSequence& sa = tree.analysis_sequence(tree.canonical(d.code_a));
    credit_agreements(sa, d.overlap - 1, ti);
    auto& c = tally.counts[d.question][ti];
    ++c.visits;
    ++c.q_nonagreements;
  }
  return tally;
}

std::size_t TagVsTagMatrix::at(const std::string& row, const std::string& col) const {
  auto r = std::find(codes.begin(), codes.end(), row);
  auto c = std::find(codes.begin(), codes.end(), col);
  if (r == codes.end() || c == codes.end()) return 0;
  return counts[r - codes.begin()][c - codes.begin()];
}

std::size_t TagVsTagMatrix::row_sum(const std::string& row) const {
  std::size_t n = 0;
  for (const auto& c : codes) n += at(row, c);
  return n;
}

std::size_t TagVsTagMatrix::column_sum(const std::string& col) const {
  std::size_t n = 0;
  for (const auto& r : codes) n += at(r, col);
  return n;
}

std::size_t TagVsTagMatrix::total() const {
  std::size_t n = 0;
  for (const auto& row : counts) {
    for (auto v : row) n += v;
  }
  return n;
}

TagVsTagMatrix tag_vs_tag(const CoderRecordSet& a, const CoderRecordSet& b, const CodingTree& tree, ComparisonType type) {
  if (type == ComparisonType::kDD) throw AnalysisError("tag-vs-tag tables cover SS and SD comparisons only");
  TagVsTagMatrix m;
  m.type = type;
  m.codes = tree.analysis_codes();
  m.counts.assign(m.codes.size(), std::vector<std::size_t>(m.codes.size(), 0));
  auto index_of = [&](const std::string& code) {
    const std::string c = tree.canonical(code);
    return static_cast<std::size_t>(std::find(m.codes.begin(), m.codes.end(), c) - m.codes.begin());
  };
  for (const auto& [ra, rb] : align(a, b)) {
    if (classify_comparison(*ra, *rb) != type) continue;
    if (t_agreement(*ra, *rb, tree).agreed) continue;
    // Every (A tag, B tag) pair: one pair for SS, the two-tag coder's two pairs for SD.
    for (const auto& ta : ra->tags) {
      for (const auto& tb : rb->tags) ++m.counts[index_of(ta.code)][index_of(tb.code)];
    }
  }
  return m;
}

TagDistribution tag_distribution(const CoderRecordSet& set, const CodingTree& tree) {
  TagDistribution d;
  d.coder_id = set.coder_id;
  d.codes = tree.analysis_codes();
  for (const auto& c : d.codes) d.counts[c] = 0;
  for (const auto& rec : set.records) {
    ++d.items;
    for (const auto& t : rec.tags) ++d.counts[tree.canonical(t.code)];
    d.total_tags += rec.tags.size();
    if (rec.tags.size() > 1) d.second_tags += rec.tags.size() - 1;
    (actionable(rec, tree) ? d.actionable_items : d.non_actionable_items)++;
  }
  return d;
}

int CategoryTable::percent(std::size_t coder, const std::string& code, const std::string& category) const {
  const auto& by_code = counts.at(coder);
  auto it = by_code.find(code);
  if (it == by_code.end()) return 0;
  auto jt = it->second.find(category);
  return round_percent(jt == it->second.end() ? 0 : jt->second, sizes.at(category));
}

int CategoryTable::actionable_percent(std::size_t coder, const std::string& category) const {
  auto it = actionable.at(coder).find(category);
  return round_percent(it == actionable.at(coder).end() ? 0 : it->second, sizes.at(category));
}

int CategoryTable::actionability_delta(const std::string& category) const {
  return std::abs(actionable_percent(0, category) - actionable_percent(1, category));
}

CategoryTable category_distribution(const CoderRecordSet& a, const CoderRecordSet& b, const Dataset& dataset,
                                    const CodingTree& tree) {
  CategoryTable t;
  t.codes = tree.analysis_codes();
  t.coder_ids = {a.coder_id, b.coder_id};
  t.counts.resize(2);
  t.actionable.resize(2);
  std::map<int, std::string> category_of;
  for (const auto& item : dataset) {
    if (!item.category) {
      ++t.uncategorized;
      continue;
    }
    category_of[item.index] = *item.category;
    ++t.sizes[*item.category];
  }
  for (const auto& [cat, n] : t.sizes) t.categories.push_back(cat);
  std::sort(t.categories.begin(), t.categories.end(), natural_less);

  const std::array<const CoderRecordSet*, 2> sets = {&a, &b};
  for (std::size_t k = 0; k < 2; ++k) {
    for (const auto& rec : sets[k]->records) {
      auto it = category_of.find(rec.item_index);
      if (it == category_of.end()) continue;
      std::set<std::string> codes;
      for (const auto& tag : rec.tags) codes.insert(tree.canonical(tag.code));
      for (const auto& c : codes) ++t.counts[k][c][it->second];
      if (actionable(rec, tree)) ++t.actionable[k][it->second];
    }
  }
  return t;
}

std::size_t UnfocusedBreakdown::total() const {
  return both[0] + both[1] + exactly_one[0] + exactly_one[1] + neither[0] + neither[1];
}

UnfocusedBreakdown unfocused_breakdown(const CoderRecordSet& a, const CoderRecordSet& b, const CodingTree& tree,
                                       const std::string& code, const std::string& label) {
  UnfocusedBreakdown u;
  u.code = code;
  u.label = label;
  auto labelled = [&](const TagRecord& r) {
    return std::any_of(r.tags.begin(), r.tags.end(),
                       [&](const Tag& t) { return tree.canonical(t.code) == code && t.has_sublabel(label); });
  };
  for (const auto& [ra, rb] : align(a, b)) {
    const ComparisonType type = classify_comparison(*ra, *rb);
    if (type == ComparisonType::kDD) continue;
    const TAgreement ag = t_agreement(*ra, *rb, tree);
    if (!ag.agreed || *ag.code != code) continue;
    const std::size_t ti = type_index(type);
    const int n = labelled(*ra) + labelled(*rb);
    (n == 2 ? u.both : n == 1 ? u.exactly_one : u.neither)[ti]++;
  }
  return u;
}

std::vector<DDRow> dd_listing(const CoderRecordSet& a, const CoderRecordSet& b, const CodingTree& tree) {
  std::vector<DDRow> rows;
  for (const auto& [ra, rb] : align(a, b)) {
    if (classify_comparison(*ra, *rb) != ComparisonType::kDD) continue;
    rows.push_back(DDRow{ra->item_index,
                         {tree.canonical(ra->tags[0].code), tree.canonical(ra->tags[1].code)},
                         {tree.canonical(rb->tags[0].code), tree.canonical(rb->tags[1].code)}});
  }
  return rows;
}

Summary summary(const CoderRecordSet& a, const CoderRecordSet& b, const CodingTree& tree) {
  Summary s;
  for (const auto& [ra, rb] : align(a, b)) {
    const ComparisonResult r = compare_item(*ra, *rb, tree);
    TypeSummary& ts = s.by_type[type_index(r.type)];
    ++ts.items;
    ++s.items;
    if (r.t_agreement) {
      ++ts.t_agreements;
      ++s.t_agreements;
      ++ts.pairings[static_cast<std::size_t>(*r.pairing)];
    }
    if (r.actionability_agreement) {
      ++ts.actionability_agreements;
      ++s.actionability_agreements;
    }
    if (r.anomaly) ++s.anomalies;
  }
  return s;
}

Analysis analyze(const CoderRecordSet& a, const CoderRecordSet& b, const Dataset& dataset, const CodingTree& tree) {
  Analysis out;
  out.coder_a = a.coder_id;
  out.coder_b = b.coder_id;
  for (const auto& [ra, rb] : align(a, b)) out.comparisons.push_back(compare_item(*ra, *rb, tree));
  out.summary = summary(a, b, tree);
  out.tally = q_tally(a, b, tree);
  out.ss_matrix = tag_vs_tag(a, b, tree, ComparisonType::kSS);
  out.sd_matrix = tag_vs_tag(a, b, tree, ComparisonType::kSD);
  out.distributions = {tag_distribution(a, tree), tag_distribution(b, tree)};
  out.categories = category_distribution(a, b, dataset, tree);
  out.unfocused = unfocused_breakdown(a, b, tree);
  out.dd = dd_listing(a, b, tree);
  if (out.categories.uncategorized > 0) {
    out.warnings.push_back(std::to_string(out.categories.uncategorized) +
                           " item(s) without a category were left out of the category table");
  }
  if (out.summary.anomalies > 0) {
    out.warnings.push_back(std::to_string(out.summary.anomalies) +
                           " item(s) had equal-length overlaps ending at different questions and were left out of the Q-tally");
  }
  return out;
}

json to_json(const ComparisonResult& r) {
  auto opt = [](const auto& o) { return o ? json(*o) : json(nullptr); };
  return json{{"item_index", r.item_index},
              {"type", to_string(r.type)},
              {"t_agreement", r.t_agreement},
              {"agreed_code", opt(r.agreed_code)},
              {"pairing", r.pairing ? json(to_string(*r.pairing)) : json(nullptr)},
              {"diverging_question", opt(r.diverging_question)},
              {"actionability_agreement", r.actionability_agreement},
              {"anomaly", r.anomaly}};
}

json to_json(const Summary& s) {
  json types = json::object();
  for (ComparisonType t : kComparisonTypes) {
    const TypeSummary& ts = s[t];
    types[to_string(t)] = json{{"items", ts.items},
                               {"items_percent", round_percent(ts.items, s.items)},
                               {"t_agreements", ts.t_agreements},
                               {"t_agreements_percent", round_percent(ts.t_agreements, ts.items)},
                               {"actionability_agreements", ts.actionability_agreements},
                               {"actionability_agreements_percent", round_percent(ts.actionability_agreements, ts.items)},
                               {"pairing",
                                {{"First-First", ts.pairings[0]}, {"First-Second", ts.pairings[1]}, {"Second-Second", ts.pairings[2]}}},
                               {"pairing_percent",
                                {{"First-First", round_percent(ts.pairings[0], ts.t_agreements)},
                                 {"First-Second", round_percent(ts.pairings[1], ts.t_agreements)},
                                 {"Second-Second", round_percent(ts.pairings[2], ts.t_agreements)}}}};
  }
  return json{{"items", s.items},
              {"t_agreements", s.t_agreements},
              {"t_agreement_percent", s.overall_agreement_percent()},
              {"actionability_agreements", s.actionability_agreements},
              {"anomalies", s.anomalies},
              {"types", types}};
}

json to_json(const QTally& t) {
  json questions = json::array();
  for (const auto& q : t.questions) {
    json entry = {{"question", q}};
    for (ComparisonType type : {ComparisonType::kSS, ComparisonType::kSD}) {
      const QuestionCounts& c = t.at(q, type);
      entry[to_string(type)] = json{{"visits", c.visits},
                                    {"q_agreements", c.q_agreements},
                                    {"yes_agreements", c.yes_agreements},
                                    {"no_agreements", c.q_agreements - c.yes_agreements},
                                    {"q_nonagreements", c.q_nonagreements},
                                    {"share", t.share(q, type)},
                                    {"within", t.within(q, type)},
                                    {"share_percent", round_percent(c.q_nonagreements, t.total_nonagreements(type))},
                                    {"within_percent", round_percent(c.q_nonagreements, c.visits)}};
    }
    questions.push_back(std::move(entry));
  }
  return json{{"questions", questions},
              {"totals",
               {{"SS", t.total_nonagreements(ComparisonType::kSS)}, {"SD", t.total_nonagreements(ComparisonType::kSD)}}},
              {"excluded_anomalies", {{"SS", t.excluded_anomalies[0]}, {"SD", t.excluded_anomalies[1]}}}};
}

json to_json(const TagVsTagMatrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.codes.size(); ++i) rows.push_back(m.counts[i]);
  json row_sums = json::array();
  json col_sums = json::array();
  for (const auto& c : m.codes) {
    row_sums.push_back(m.row_sum(c));
    col_sums.push_back(m.column_sum(c));
  }
  return json{{"type", to_string(m.type)}, {"codes", m.codes},         {"counts", rows},
              {"row_sums", row_sums},       {"column_sums", col_sums}, {"total", m.total()}};
}

json to_json(const TagDistribution& d) {
  json counts = json::object();
  json percents = json::object();
  for (const auto& c : d.codes) {
    counts[c] = d.counts.at(c);
    percents[c] = round_percent(d.counts.at(c), d.items);
  }
  return json{{"coder_id", d.coder_id},
              {"codes", d.codes},
              {"counts", counts},
              {"percent_of_items", percents},
              {"items", d.items},
              {"total_tags", d.total_tags},
              {"second_tags", d.second_tags},
              {"actionable_items", d.actionable_items},
              {"non_actionable_items", d.non_actionable_items},
              {"actionable_percent", round_percent(d.actionable_items, d.items)}};
}

json to_json(const CategoryTable& c) {
  json sizes = json::object();
  for (const auto& cat : c.categories) sizes[cat] = c.sizes.at(cat);
  json coders = json::array();
  for (std::size_t k = 0; k < c.coder_ids.size(); ++k) {
    json codes = json::object();
    for (const auto& code : c.codes) {
      json row = json::object();
      for (const auto& cat : c.categories) row[cat] = c.percent(k, code, cat);
      codes[code] = std::move(row);
    }
    json act = json::object();
    for (const auto& cat : c.categories) act[cat] = c.actionable_percent(k, cat);
    coders.push_back(json{{"coder_id", c.coder_ids[k]}, {"percent", codes}, {"actionable_percent", act}});
  }
  json delta = json::object();
  for (const auto& cat : c.categories) delta[cat] = c.actionability_delta(cat);
  return json{{"categories", c.categories}, {"codes", c.codes},  {"sizes", sizes},
              {"coders", coders},           {"actionability_delta", delta}, {"uncategorized", c.uncategorized}};
}

json to_json(const UnfocusedBreakdown& u) {
  auto pair = [](const std::array<std::size_t, 2>& v) { return json{{"SS", v[0]}, {"SD", v[1]}}; };
  return json{{"code", u.code},
              {"label", u.label},
              {"both", pair(u.both)},
              {"exactly_one", pair(u.exactly_one)},
              {"neither", pair(u.neither)},
              {"total", u.total()}};
}

json to_json(const std::vector<DDRow>& rows) {
  json arr = json::array();
  for (const auto& r : rows) arr.push_back(json{{"item_index", r.item_index}, {"a", r.a}, {"b", r.b}});
  return arr;
}

json to_json(const Analysis& a) {
  json comparisons = json::array();
  for (const auto& c : a.comparisons) comparisons.push_back(to_json(c));
  return json{{"coders", {a.coder_a, a.coder_b}},
              {"summary", to_json(a.summary)},
              {"q_tally", to_json(a.tally)},
              {"tag_vs_tag", {{"SS", to_json(a.ss_matrix)}, {"SD", to_json(a.sd_matrix)}}},
              {"distributions", {to_json(a.distributions[0]), to_json(a.distributions[1])}},
              {"categories", to_json(a.categories)},
              {"unfocused", to_json(a.unfocused)},
              {"dd", to_json(a.dd)},
              {"comparisons", comparisons},
              {"warnings", a.warnings}};
}

}  // namespace sacode
