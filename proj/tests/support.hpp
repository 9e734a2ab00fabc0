#pragma once

#include <initializer_list>
#include <random>
#include <string>
#include <vector>

#include "sacode/records.hpp"
#include "sacode/tree.hpp"

namespace sacode::test {

inline Tag tag(const CodingTree& tree, const std::string& code) {
  return Tag{code, tree.tag_to_sequence(code), {}};
}

inline TagRecord rec(const CodingTree& tree, int ix, std::initializer_list<std::string> codes,
                     const std::string& coder = "C") {
  TagRecord r;
  r.item_index = ix;
  r.coder_id = coder;
  for (const auto& c : codes) r.tags.push_back(tag(tree, c));
  return r;
}

inline TagRecord rec(const CodingTree& tree, int ix, const std::vector<std::string>& codes, const std::string& coder) {
  TagRecord r;
  r.item_index = ix;
  r.coder_id = coder;
  for (const auto& c : codes) r.tags.push_back(tag(tree, c));
  return r;
}

inline Dataset items(int n, const std::string& category = "") {
  Dataset d;
  for (int i = 1; i <= n; ++i) {
    AdviceItem it;
    it.index = i;
    it.text = "advice " + std::to_string(i);
    if (!category.empty()) it.category = category;
    d.push_back(it);
  }
  return d;
}

/// Random pair of record sets over `n` items using the tree's analysis codes.
inline std::pair<CoderRecordSet, CoderRecordSet> random_sets(const CodingTree& tree, int n, std::mt19937& rng,
                                                             double p_double = 0.25) {
  const auto& codes = tree.analysis_codes();
  std::uniform_int_distribution<std::size_t> pick(0, codes.size() - 1);
  std::bernoulli_distribution dbl(p_double);
  auto draw = [&](int ix, const std::string& coder) {
    std::vector<std::string> cs = {codes[pick(rng)]};
    if (codes.size() > 1 && dbl(rng)) {
      std::string second;
      do {
        second = codes[pick(rng)];
      } while (second == cs[0]);
      cs.push_back(second);
    }
    return rec(tree, ix, cs, coder);
  };
  CoderRecordSet a{"A", {}, true};
  CoderRecordSet b{"B", {}, true};
  for (int i = 1; i <= n; ++i) {
    a.records.push_back(draw(i, "A"));
    b.records.push_back(draw(i, "B"));
  }
  return {a, b};
}

}  // namespace sacode::test
