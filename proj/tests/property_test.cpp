#include <gtest/gtest.h>

#include <set>

#include "sacode/agreement.hpp"
#include "sacode/ingest.hpp"
#include "sacode/session.hpp"
#include "support.hpp"

using namespace sacode;
using CT = ComparisonType;

namespace {

const CodingTree& def() { return CodingTree::default_tree(); }

// Random binary tree with `questions` internal nodes: start from one question
// and keep replacing a random leaf slot with a fresh question.
CodingTree random_tree(std::mt19937& rng, int questions) {
  TreeSpec spec;
  spec.root = "Q1";
  std::vector<std::pair<std::string, Answer>> open = {{"Q1", Answer::kYes}, {"Q1", Answer::kNo}};
  std::map<std::string, std::map<Answer, std::string>> kids;
  for (int q = 2; q <= questions; ++q) {
    std::uniform_int_distribution<std::size_t> pick(0, open.size() - 1);
    const std::size_t i = pick(rng);
    const auto [parent, ans] = open[i];
    open.erase(open.begin() + static_cast<std::ptrdiff_t>(i));
    const std::string id = "Q" + std::to_string(q);
    kids[parent][ans] = "Q:" + id;
    open.push_back({id, Answer::kYes});
    open.push_back({id, Answer::kNo});
  }
  std::shuffle(open.begin(), open.end(), rng);
  std::bernoulli_distribution act(0.5);
  int leaf = 0;
  for (const auto& [parent, ans] : open) {
    const std::string code = "L" + std::to_string(++leaf);
    kids[parent][ans] = "C:" + code;
    spec.codes[code] = Code{code, code, "", act(rng), {}};
  }
  for (int q = 1; q <= questions; ++q) {
    const std::string id = "Q" + std::to_string(q);
    spec.questions[id] = QuestionNode{id, "question " + id, "", *NodeRef::parse(kids[id][Answer::kYes]),
                                      *NodeRef::parse(kids[id][Answer::kNo])};
  }
  return CodingTree::build(spec);
}

// Codes reachable below each node, collected by a plain depth-first walk over the spec.
std::set<std::string> below(const TreeSpec& spec, const NodeRef& at) {
  if (at.is_code()) return {at.id};
  const QuestionNode& q = spec.questions.at(at.id);
  std::set<std::string> out = below(spec, q.yes_child);
  for (auto& c : below(spec, q.no_child)) out.insert(c);
  return out;
}

// The question at which paths to x and y part ways, and its depth (1-based).
std::pair<std::string, std::size_t> split_oracle(const TreeSpec& spec, const std::string& x, const std::string& y) {
  NodeRef at{NodeRef::Kind::kQuestion, spec.root};
  std::size_t depth = 1;
  for (;;) {
    const QuestionNode& q = spec.questions.at(at.id);
    const auto yes = below(spec, q.yes_child);
    const auto no = below(spec, q.no_child);
    if (yes.count(x) && yes.count(y)) {
      at = q.yes_child;
    } else if (no.count(x) && no.count(y)) {
      at = q.no_child;
    } else {
      return {q.id, depth};
    }
    ++depth;
  }
}

void check_all_pairs(const CodingTree& tree) {
  const auto codes = tree.raw_leaf_codes();
  for (const auto& x : codes) {
    for (const auto& y : codes) {
      if (x == y) continue;
      const Divergence d = diverging_question(test::rec(tree, 1, {x}), test::rec(tree, 1, {y}), tree);
      const auto [q, depth] = split_oracle(tree.spec(), x, y);
      ASSERT_EQ(d.question, q) << x << " vs " << y;
      ASSERT_EQ(d.overlap, depth) << x << " vs " << y;
      ASSERT_FALSE(d.anomaly);
    }
  }
}

std::size_t nonagreements(const CoderRecordSet& a, const CoderRecordSet& b, const CodingTree& tree, CT type) {
  std::size_t n = 0;
  for (const auto& [ra, rb] : align(a, b)) {
    if (classify_comparison(*ra, *rb) == type && !t_agreement(*ra, *rb, tree).agreed) ++n;
  }
  return n;
}

}  // namespace

TEST(Property, DivergingQuestionMatchesOracleOnDefaultTree) { check_all_pairs(def()); }

TEST(Property, DivergingQuestionMatchesOracleOnRandomTrees) {
  std::mt19937 rng(2024);
  for (int i = 0; i < 100; ++i) {
    const CodingTree t = random_tree(rng, 4);
    ASSERT_EQ(t.raw_leaf_codes().size(), 5u);
    check_all_pairs(t);
  }
}

TEST(Property, SequencesReplayOnRandomTrees) {
  std::mt19937 rng(99);
  for (int i = 0; i < 100; ++i) {
    const CodingTree t = random_tree(rng, 1 + static_cast<int>(rng() % 9));
    for (const auto& code : t.raw_leaf_codes()) {
      const QuestionSequence s = t.tag_to_sequence(code);
      NodeRef at{NodeRef::Kind::kQuestion, t.root()};
      for (std::size_t k = 0; k < s.n(); ++k) at = t.step(at.id, s.answers[k]);
      ASSERT_EQ(at.str(), "C:" + code);
      std::size_t depth = 0;
      for (const auto& [id, q] : t.spec().questions) {
        if (below(t.spec(), NodeRef{NodeRef::Kind::kQuestion, id}).count(code)) ++depth;
      }
      ASSERT_EQ(s.n(), depth) << code;
    }
  }
}

TEST(Property, TallyConservation) {
  std::mt19937 rng(5);
  for (int round = 0; round < 50; ++round) {
    auto [a, b] = test::random_sets(def(), 120, rng, 0.3);
    const CodingTree tree = round % 2 ? def().with_t_tprime_equal(true) : def();
    const QTally t = q_tally(a, b, tree);
    for (CT type : {CT::kSS, CT::kSD}) {
      ASSERT_EQ(t.total_nonagreements(type), nonagreements(a, b, tree, type));
      double share = 0;
      for (const auto& q : t.questions) {
        const QuestionCounts& c = t.at(q, type);
        ASSERT_EQ(c.visits, c.q_agreements + c.q_nonagreements) << q;
        ASSERT_LE(c.yes_agreements, c.q_agreements) << q;
        share += t.share(q, type);
        // A question is only reached by agreeing at its parent.
        if (auto parent = tree.analysis_parent(q)) ASSERT_LE(c.visits, t.at(parent->first, type).q_agreements) << q;
      }
      if (t.total_nonagreements(type) > 0) ASSERT_NEAR(share, 100.0, 1e-9);
      ASSERT_EQ(t.at(tree.root(), type).visits, summary(a, b, tree)[type].items);
    }
    ASSERT_EQ(t.excluded_anomalies[0] + t.excluded_anomalies[1], 0u);
  }
}

TEST(Property, MatrixConservation) {
  std::mt19937 rng(6);
  for (int round = 0; round < 50; ++round) {
    auto [a, b] = test::random_sets(def(), 150, rng, 0.3);
    const auto ss = tag_vs_tag(a, b, def(), CT::kSS);
    const auto sd = tag_vs_tag(a, b, def(), CT::kSD);
    ASSERT_EQ(ss.total(), nonagreements(a, b, def(), CT::kSS));
    ASSERT_EQ(sd.total(), 2 * nonagreements(a, b, def(), CT::kSD));
    std::size_t rows = 0, cols = 0;
    for (const auto& c : ss.codes) {
      ASSERT_EQ(ss.at(c, c), 0u);
      ASSERT_EQ(sd.at(c, c), 0u);
      rows += ss.row_sum(c);
      cols += ss.column_sum(c);
    }
    ASSERT_EQ(rows, ss.total());
    ASSERT_EQ(cols, ss.total());
  }
}

TEST(Property, SwappingCodersTransposes) {
  std::mt19937 rng(7);
  for (int round = 0; round < 30; ++round) {
    auto [a, b] = test::random_sets(def(), 100, rng, 0.3);
    for (CT type : {CT::kSS, CT::kSD}) {
      const auto m = tag_vs_tag(a, b, def(), type);
      const auto mt = tag_vs_tag(b, a, def(), type);
      for (const auto& r : m.codes) {
        for (const auto& c : m.codes) ASSERT_EQ(m.at(r, c), mt.at(c, r));
      }
    }
    const Summary s = summary(a, b, def());
    const Summary st = summary(b, a, def());
    ASSERT_EQ(s.t_agreements, st.t_agreements);
    ASSERT_EQ(s.actionability_agreements, st.actionability_agreements);
    const QTally t = q_tally(a, b, def());
    const QTally tt = q_tally(b, a, def());
    for (const auto& q : t.questions) {
      ASSERT_EQ(t.at(q, CT::kSS), tt.at(q, CT::kSS)) << q;
      ASSERT_EQ(t.at(q, CT::kSD), tt.at(q, CT::kSD)) << q;
    }
    for (const auto& [ra, rb] : align(a, b)) {
      ASSERT_EQ(classify_comparison(*ra, *rb), classify_comparison(*rb, *ra));
      ASSERT_EQ(t_agreement(*ra, *rb, def()).agreed, t_agreement(*rb, *ra, def()).agreed);
      ASSERT_EQ(actionability_agreement(*ra, *rb, def()), actionability_agreement(*rb, *ra, def()));
      if (classify_comparison(*ra, *rb) == CT::kDD || t_agreement(*ra, *rb, def()).agreed) continue;
      ASSERT_EQ(diverging_question(*ra, *rb, def()).question, diverging_question(*rb, *ra, def()).question);
    }
  }
}

TEST(Property, Containment) {
  std::mt19937 rng(8);
  for (int round = 0; round < 50; ++round) {
    auto [a, b] = test::random_sets(def(), 90, rng, 0.4);
    const Summary s = summary(a, b, def());
    const Summary m = summary(a, b, def().with_t_tprime_equal(true));
    std::size_t items = 0;
    for (CT type : kComparisonTypes) {
      const TypeSummary& ts = s[type];
      items += ts.items;
      ASSERT_LE(ts.t_agreements, ts.items);
      // Agreeing on a code means agreeing on its actionability.
      ASSERT_LE(ts.t_agreements, ts.actionability_agreements);
      ASSERT_LE(ts.actionability_agreements, ts.items);
      ASSERT_EQ(ts.pairings[0] + ts.pairings[1] + ts.pairings[2], ts.t_agreements);
      ASSERT_LE(ts.t_agreements, m[type].t_agreements);
    }
    ASSERT_EQ(items, s.items);
    ASSERT_EQ(s.items, 90u);
    for (const CoderRecordSet* set : {&a, &b}) {
      const TagDistribution d = tag_distribution(*set, def());
      std::size_t tags = 0;
      for (const auto& [code, n] : d.counts) tags += n;
      ASSERT_EQ(tags, d.items + d.second_tags);
      ASSERT_EQ(d.actionable_items + d.non_actionable_items, d.items);
    }
    ASSERT_EQ(s[CT::kSS].pairings[1] + s[CT::kSS].pairings[2], 0u);
    ASSERT_EQ(s[CT::kSD].pairings[2], 0u);
    ASSERT_EQ(dd_listing(a, b, def()).size(), s[CT::kDD].items);
    ASSERT_EQ(s.anomalies, 0u);
  }
}

TEST(Property, CategoryPercentsStayInRange) {
  std::mt19937 rng(9);
  auto [a, b] = test::random_sets(def(), 200, rng, 0.3);
  Dataset d = test::items(200);
  for (auto& item : d) item.category = "UK-" + std::to_string(rng() % 13 + 1);
  const CategoryTable t = category_distribution(a, b, d, def());
  std::size_t total = 0;
  for (const auto& cat : t.categories) {
    total += t.sizes.at(cat);
    for (std::size_t k = 0; k < 2; ++k) {
      int sum = 0;
      for (const auto& code : t.codes) {
        const int p = t.percent(k, code, cat);
        ASSERT_GE(p, 0);
        ASSERT_LE(p, 100);
        sum += p;
      }
      // Each item carries one or two codes, so the column adds up to 100-200% give or take rounding.
      ASSERT_GE(sum, 100 - static_cast<int>(t.codes.size()));
      ASSERT_LE(sum, 200 + static_cast<int>(t.codes.size()));
    }
  }
  ASSERT_EQ(total, 200u);
}

// Random coders drive sessions with yes/no/both and undo; whatever they do,
// finalized records pass validation, carry at most two distinct tags, and a
// second fork or a fork into merging branches is never accepted.
TEST(Property, SessionsOnlyProduceValidRecords) {
  std::mt19937 rng(10);
  for (const char* file : {"default_tree.json", "legacy_q11_tree.json", "q1_split_tree.json"}) {
    auto tree = std::make_shared<const CodingTree>(CodingTree::load(std::string(SACODE_SOURCE_DIR "/config/") + file));
    auto data = std::make_shared<const Dataset>(test::items(60));
    Session s = Session::start(tree, data, "R");
    std::uniform_int_distribution<int> move(0, 9);
    for (const auto& item : *data) {
      for (int steps = 0; steps < 200; ++steps) {
        const ItemState st = s.state(item.index);
        if (st.status == ItemStatus::kComplete) {
          if (move(rng) == 0) {
            s.undo(item.index);
            continue;
          }
          break;
        }
        ASSERT_TRUE(st.cursor);
        const int m = move(rng);
        if (m == 0 && !s.log(item.index).empty()) {
          s.undo(item.index);
          continue;
        }
        const AnswerChoice c = m < 4 ? AnswerChoice::kYes : m < 8 ? AnswerChoice::kNo : AnswerChoice::kBoth;
        try {
          s.answer(item.index, *st.cursor, c);
        } catch (const SessionError& e) {
          ASSERT_EQ(c, AnswerChoice::kBoth);
          ASSERT_TRUE(e.kind() == SessionError::Kind::kSecondFork || e.kind() == SessionError::Kind::kForkRefused);
          if (e.kind() == SessionError::Kind::kSecondFork) ASSERT_TRUE(st.fork_question);
        }
      }
      ASSERT_EQ(s.state(item.index).status, ItemStatus::kComplete);
      const TagRecord r = s.finalize_item(item.index);
      ASSERT_GE(r.tags.size(), 1u);
      ASSERT_LE(r.tags.size(), 2u);
      if (r.tags.size() == 2) ASSERT_NE(tree->canonical(r.tags[0].code), tree->canonical(r.tags[1].code));
    }
    const CoderRecordSet out = s.export_records();
    ASSERT_TRUE(out.complete);
    ASSERT_TRUE(validate_records({out}, *data, *tree).empty()) << file;
  }
}
