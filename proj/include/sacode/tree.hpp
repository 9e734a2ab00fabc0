#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace sacode {

enum class Answer { kYes, kNo };

char answer_letter(Answer a);
Answer answer_from_letter(std::string_view s);

/// Reference to a child of a question node: either another question or a code leaf.
/// Serialized as "Q:<id>" or "C:<id>".
struct NodeRef {
  enum class Kind { kQuestion, kCode };
  Kind kind = Kind::kCode;
  std::string id;

  bool is_question() const { return kind == Kind::kQuestion; }
  bool is_code() const { return kind == Kind::kCode; }
  std::string str() const;
  static std::optional<NodeRef> parse(std::string_view s);

  friend bool operator==(const NodeRef&, const NodeRef&) = default;
};

struct Code {
  std::string id;
  std::string display_name;
  std::string description;
  bool actionable = false;
  // Supplementary labels a coder may attach to this code (e.g. "Unfocused" on M1).
  std::vector<std::string> sublabels;
};

struct QuestionNode {
  std::string id;
  std::string text;
  std::string annotation;
  NodeRef yes_child;
  NodeRef no_child;

  const NodeRef& child(Answer a) const { return a == Answer::kYes ? yes_child : no_child; }
};

/// Root-to-leaf path for one code: the questions answered, in order, and the answers given.
struct QuestionSequence {
  std::vector<std::string> nodes;
  std::vector<Answer> answers;
  std::string terminal_code;

  std::size_t n() const { return nodes.size(); }
  friend bool operator==(const QuestionSequence&, const QuestionSequence&) = default;
};

nlohmann::json to_json(const QuestionSequence& seq);
QuestionSequence sequence_from_json(const nlohmann::json& j);

/// Unvalidated tree definition as read from a tree-config document.
struct TreeSpec {
  std::string root;
  std::map<std::string, QuestionNode> questions;
  std::map<std::string, Code> codes;
  std::map<std::string, std::string> merge_map;
  bool treat_t_tprime_as_equal = false;
};

struct Finding {
  std::string kind;
  std::string subject;
  std::string message;
};
using ValidationReport = std::vector<Finding>;

class TreeError : public std::runtime_error {
 public:
  explicit TreeError(const std::string& what, ValidationReport findings = {})
      : std::runtime_error(what), findings_(std::move(findings)) {}
  const ValidationReport& findings() const { return findings_; }

 private:
  ValidationReport findings_;
};

/// Parses the tree-config JSON schema. Throws TreeError on schema violations
/// (missing fields, wrong types, malformed child references).
TreeSpec parse_tree_spec(const nlohmann::json& doc);
nlohmann::json to_json(const TreeSpec& spec);

/// Lists every structural problem in `spec`; empty iff the tree is usable.
ValidationReport validate_tree(const TreeSpec& spec);

/// "Natural" ordering so that Q2 < Q10 and P1 < P6 < T < T'.
bool natural_less(std::string_view a, std::string_view b);

/// An immutable, validated coding tree.
///
/// Two views are kept. The raw view is what coders navigate (it may contain
/// legacy questions such as Q11). The analysis view applies merge_map to every
/// leaf and collapses any question whose two subtrees end in the same canonical
/// code, so each canonical code sits at exactly one analysis leaf.
class CodingTree {
 public:
  static CodingTree build(TreeSpec spec);
  static CodingTree from_json(const nlohmann::json& doc);
  static CodingTree load(const std::filesystem::path& path);
  static const CodingTree& default_tree();

  const TreeSpec& spec() const { return spec_; }
  const std::string& root() const { return spec_.root; }
  const std::string& hash() const { return hash_; }

  bool has_question(std::string_view id) const;
  bool has_code(std::string_view id) const;
  const QuestionNode& question(std::string_view id) const;
  const Code& code(std::string_view id) const;

  /// Raw-tree transition. Throws std::out_of_range for unknown questions.
  const NodeRef& step(std::string_view at, Answer a) const;

  /// Path to a raw leaf code, or to a canonical code in the analysis view when
  /// the code is only reachable through merging. Throws std::out_of_range.
  QuestionSequence tag_to_sequence(std::string_view code) const;

  std::string canonical(std::string_view code) const;
  bool is_raw_leaf(std::string_view code) const;
  bool is_actionable(std::string_view code) const;
  /// Code equality used by agreement analysis (honours the T/T' flag).
  bool codes_equal(std::string_view a, std::string_view b) const;
  bool treat_t_tprime_as_equal() const { return spec_.treat_t_tprime_as_equal; }
  CodingTree with_t_tprime_equal(bool on) const;

  /// True when merging made both branches of this raw question end in one code.
  bool is_collapsed(std::string_view question) const;

  // Analysis view.
  const QuestionSequence& analysis_sequence(std::string_view canonical_code) const;
  const NodeRef& analysis_child(std::string_view question, Answer a) const;
  /// Canonical codes at analysis leaves, natural order.
  const std::vector<std::string>& analysis_codes() const { return analysis_codes_; }
  /// Questions in the analysis view, natural order.
  const std::vector<std::string>& analysis_questions() const { return analysis_questions_; }
  /// Parent of a question in the analysis view (nullopt for the root).
  std::optional<std::pair<std::string, Answer>> analysis_parent(std::string_view question) const;

  std::vector<std::string> raw_leaf_codes() const;

 private:
  CodingTree() = default;
  void index();

  TreeSpec spec_;
  std::string hash_;
  std::map<std::string, QuestionSequence, std::less<>> raw_paths_;
  std::map<std::string, QuestionSequence, std::less<>> analysis_paths_;
  std::map<std::string, std::pair<NodeRef, NodeRef>, std::less<>> analysis_children_;
  std::map<std::string, std::pair<std::string, Answer>, std::less<>> analysis_parents_;
  std::map<std::string, bool, std::less<>> collapsed_;
  std::vector<std::string> analysis_codes_;
  std::vector<std::string> analysis_questions_;
};

}  // namespace sacode
