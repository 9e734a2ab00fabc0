#include "sacode/tree.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <set>

#include "default_tree_config.hpp"
#include "sacode/hash.hpp"

namespace sacode {

using nlohmann::json;

char answer_letter(Answer a) { return a == Answer::kYes ? 'Y' : 'N'; }

Answer answer_from_letter(std::string_view s) {
  if (s == "Y" || s == "y" || s == "yes") return Answer::kYes;
  if (s == "N" || s == "n" || s == "no") return Answer::kNo;
  throw std::invalid_argument("not an answer: " + std::string(s));
}

std::string NodeRef::str() const { return (is_question() ? "Q:" : "C:") + id; }

std::optional<NodeRef> NodeRef::parse(std::string_view s) {
  if (s.size() < 3 || s[1] != ':') return std::nullopt;
  NodeRef ref;
  if (s[0] == 'Q') {
    ref.kind = Kind::kQuestion;
  } else if (s[0] == 'C') {
    ref.kind = Kind::kCode;
  } else {
    return std::nullopt;
  }
  ref.id = std::string(s.substr(2));
  return ref;
}

json to_json(const QuestionSequence& seq) {
  std::string answers;
  for (Answer a : seq.answers) answers.push_back(answer_letter(a));
  return json{{"nodes", seq.nodes}, {"answers", answers}, {"code", seq.terminal_code}};
}

QuestionSequence sequence_from_json(const json& j) {
  QuestionSequence seq;
  seq.nodes = j.at("nodes").get<std::vector<std::string>>();
  for (char c : j.at("answers").get<std::string>()) seq.answers.push_back(answer_from_letter(std::string(1, c)));
  seq.terminal_code = j.at("code").get<std::string>();
  if (seq.nodes.size() != seq.answers.size()) throw std::invalid_argument("sequence nodes/answers length mismatch");
  return seq;
}

bool natural_less(std::string_view a, std::string_view b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const bool da = std::isdigit(static_cast<unsigned char>(a[i])) != 0;
    const bool db = std::isdigit(static_cast<unsigned char>(b[j])) != 0;
    if (da && db) {
      std::size_t ei = i, ej = j;
      while (ei < a.size() && std::isdigit(static_cast<unsigned char>(a[ei]))) ++ei;
      while (ej < b.size() && std::isdigit(static_cast<unsigned char>(b[ej]))) ++ej;
      const auto na = std::stoull(std::string(a.substr(i, ei - i)));
      const auto nb = std::stoull(std::string(b.substr(j, ej - j)));
      if (na != nb) return na < nb;
      i = ei;
      j = ej;
      continue;
    }
    if (a[i] != b[j]) return a[i] < b[j];
    ++i;
    ++j;
  }
  return (a.size() - i) < (b.size() - j);
}

namespace {

const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw TreeError("schema: " + where + " missing field '" + key + "'");
  return *it;
}

std::string require_string(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_string()) throw TreeError("schema: " + where + "." + key + " must be a string");
  return v.get<std::string>();
}

std::string optional_string(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) return {};
  if (!it->is_string()) throw TreeError("schema: " + where + "." + key + " must be a string");
  return it->get<std::string>();
}

NodeRef require_ref(const json& obj, const char* key, const std::string& where) {
  const std::string s = require_string(obj, key, where);
  auto ref = NodeRef::parse(s);
  if (!ref) throw TreeError("schema: " + where + "." + key + " '" + s + "' must be prefixed Q: or C:");
  return *ref;
}

}  // namespace

TreeSpec parse_tree_spec(const json& doc) {
  if (!doc.is_object()) throw TreeError("schema: tree config must be a JSON object");
  TreeSpec spec;
  spec.root = require_string(doc, "root", "tree");

  const json& questions = require(doc, "questions", "tree");
  if (!questions.is_object()) throw TreeError("schema: questions must be an object");
  for (const auto& [id, q] : questions.items()) {
    const std::string where = "questions." + id;
    if (!q.is_object()) throw TreeError("schema: " + where + " must be an object");
    QuestionNode node;
    node.id = id;
    node.text = require_string(q, "text", where);
    node.annotation = optional_string(q, "annotation", where);
    node.yes_child = require_ref(q, "yes", where);
    node.no_child = require_ref(q, "no", where);
    spec.questions.emplace(id, std::move(node));
  }

  const json& codes = require(doc, "codes", "tree");
  if (!codes.is_object()) throw TreeError("schema: codes must be an object");
  for (const auto& [id, c] : codes.items()) {
    const std::string where = "codes." + id;
    if (!c.is_object()) throw TreeError("schema: " + where + " must be an object");
    Code code;
    code.id = id;
    code.display_name = require_string(c, "name", where);
    code.description = optional_string(c, "description", where);
    const json& act = require(c, "actionable", where);
    if (!act.is_boolean()) throw TreeError("schema: " + where + ".actionable must be a boolean");
    code.actionable = act.get<bool>();
    if (auto it = c.find("sublabels"); it != c.end()) {
      if (!it->is_array()) throw TreeError("schema: " + where + ".sublabels must be an array");
      for (const auto& s : *it) {
        if (!s.is_string()) throw TreeError("schema: " + where + ".sublabels entries must be strings");
        code.sublabels.push_back(s.get<std::string>());
      }
    }
    spec.codes.emplace(id, std::move(code));
  }

  if (auto it = doc.find("merge_map"); it != doc.end()) {
    if (!it->is_object()) throw TreeError("schema: merge_map must be an object");
    for (const auto& [from, to] : it->items()) {
      if (!to.is_string()) throw TreeError("schema: merge_map." + from + " must be a string");
      spec.merge_map.emplace(from, to.get<std::string>());
    }
  }
  if (auto it = doc.find("treat_T_Tprime_as_equal"); it != doc.end()) {
    if (!it->is_boolean()) throw TreeError("schema: treat_T_Tprime_as_equal must be a boolean");
    spec.treat_t_tprime_as_equal = it->get<bool>();
  }
  return spec;
}

json to_json(const TreeSpec& spec) {
  json questions = json::object();
  for (const auto& [id, q] : spec.questions) {
    questions[id] = {{"text", q.text}, {"annotation", q.annotation}, {"yes", q.yes_child.str()}, {"no", q.no_child.str()}};
  }
  json codes = json::object();
  for (const auto& [id, c] : spec.codes) {
    json entry = {{"name", c.display_name}, {"actionable", c.actionable}, {"description", c.description}};
    if (!c.sublabels.empty()) entry["sublabels"] = c.sublabels;
    codes[id] = std::move(entry);
  }
  json doc = {{"root", spec.root}, {"questions", questions}, {"codes", codes}};
  if (!spec.merge_map.empty()) doc["merge_map"] = spec.merge_map;
  if (spec.treat_t_tprime_as_equal) doc["treat_T_Tprime_as_equal"] = true;
  return doc;
}

namespace {

std::string canonical_of(const TreeSpec& spec, const std::string& code) {
  auto it = spec.merge_map.find(code);
  return it == spec.merge_map.end() ? code : it->second;
}

// Analysis-view node: a question that survives collapsing, or a canonical code leaf.
NodeRef collapse(const TreeSpec& spec, const NodeRef& ref, std::map<std::string, bool, std::less<>>& collapsed) {
  if (ref.is_code()) return NodeRef{NodeRef::Kind::kCode, canonical_of(spec, ref.id)};
  const QuestionNode& q = spec.questions.at(ref.id);
  NodeRef yes = collapse(spec, q.yes_child, collapsed);
  NodeRef no = collapse(spec, q.no_child, collapsed);
  const bool merged = yes.is_code() && no.is_code() && yes.id == no.id;
  collapsed[ref.id] = merged;
  return merged ? yes : ref;
}

}  // namespace

ValidationReport validate_tree(const TreeSpec& spec) {
  ValidationReport report;
  auto add = [&](std::string kind, std::string subject, std::string message) {
    report.push_back({std::move(kind), std::move(subject), std::move(message)});
  };

  bool structural_ok = true;
  if (!spec.questions.contains(spec.root)) {
    add("root missing", spec.root, "root '" + spec.root + "' is not a question");
    structural_ok = false;
  }
  for (const auto& [id, q] : spec.questions) {
    if (q.id != id) add("id mismatch", id, "question keyed '" + id + "' carries id '" + q.id + "'");
    for (const NodeRef* child : {&q.yes_child, &q.no_child}) {
      const bool exists = child->is_question() ? spec.questions.contains(child->id) : spec.codes.contains(child->id);
      if (!exists) {
        add("dangling child reference", id, id + " refers to missing " + child->str());
        structural_ok = false;
      }
    }
  }

  std::map<std::string, int> leaf_count;
  if (structural_ok) {
    std::set<std::string> visited;
    std::set<std::string> on_stack;
    std::function<void(const std::string&)> walk = [&](const std::string& qid) {
      if (on_stack.contains(qid)) {
        add("cycle", qid, "question " + qid + " is its own descendant");
        structural_ok = false;
        return;
      }
      if (visited.contains(qid)) {
        add("shared question", qid, "question " + qid + " has more than one parent");
        structural_ok = false;
        return;
      }
      visited.insert(qid);
      on_stack.insert(qid);
      const QuestionNode& q = spec.questions.at(qid);
      for (const NodeRef* child : {&q.yes_child, &q.no_child}) {
        if (child->is_question()) {
          walk(child->id);
        } else {
          ++leaf_count[child->id];
        }
      }
      on_stack.erase(qid);
    };
    walk(spec.root);
    for (const auto& [id, q] : spec.questions) {
      if (!visited.contains(id)) add("unreachable question", id, "question " + id + " is not reachable from the root");
    }
  }

  std::set<std::string> merge_targets;
  for (const auto& [from, to] : spec.merge_map) {
    merge_targets.insert(to);
    if (!spec.codes.contains(from)) add("merge source missing", from, "merge_map source " + from + " is not a code");
    if (!spec.codes.contains(to)) add("merge target missing", to, "merge_map target " + to + " (from " + from + ") is not a code");
    if (spec.merge_map.contains(to)) add("merge chain", to, "merge_map target " + to + " is itself merged");
  }

  for (const auto& [id, n] : leaf_count) {
    if (n > 1) add("duplicate leaf code", id, "code " + id + " appears at " + std::to_string(n) + " leaves");
  }
  if (structural_ok) {
    for (const auto& [id, c] : spec.codes) {
      if (c.id != id) add("id mismatch", id, "code keyed '" + id + "' carries id '" + c.id + "'");
      if (!leaf_count.contains(id) && !merge_targets.contains(id)) {
        add("code not at a leaf", id, "code " + id + " is not reachable at any leaf");
      }
    }
  }

  if (structural_ok && report.empty()) {
    std::map<std::string, bool, std::less<>> collapsed;
    NodeRef root = collapse(spec, NodeRef{NodeRef::Kind::kQuestion, spec.root}, collapsed);
    if (root.is_code()) {
      add("degenerate tree", spec.root, "every leaf merges into code " + root.id);
    } else {
      std::map<std::string, int> canonical_count;
      std::function<void(const std::string&)> walk = [&](const std::string& qid) {
        const QuestionNode& q = spec.questions.at(qid);
        for (const NodeRef* child : {&q.yes_child, &q.no_child}) {
          NodeRef c = collapse(spec, *child, collapsed);
          if (c.is_code()) {
            ++canonical_count[c.id];
          } else {
            walk(c.id);
          }
        }
      };
      walk(root.id);
      for (const auto& [id, n] : canonical_count) {
        if (n > 1) add("merged code at multiple leaves", id, "after merging, code " + id + " appears at " + std::to_string(n) + " leaves");
      }
    }
  }
  return report;
}

CodingTree CodingTree::build(TreeSpec spec) {
  ValidationReport report = validate_tree(spec);
  if (!report.empty()) {
    std::string msg = "invalid coding tree:";
    for (const auto& f : report) msg += "\n  " + f.kind + ": " + f.message;
    throw TreeError(msg, std::move(report));
  }
  CodingTree tree;
  tree.spec_ = std::move(spec);
  tree.hash_ = sha256_hex(to_json(tree.spec_).dump());
  tree.index();
  return tree;
}

CodingTree CodingTree::from_json(const json& doc) { return build(parse_tree_spec(doc)); }

CodingTree CodingTree::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw TreeError("cannot open tree config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw TreeError("schema: " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(doc);
}

const CodingTree& CodingTree::default_tree() {
  static const CodingTree tree = from_json(json::parse(kDefaultTreeJson));
  return tree;
}

void CodingTree::index() {
  std::function<void(const std::string&, QuestionSequence)> walk_raw = [&](const std::string& qid, QuestionSequence prefix) {
    const QuestionNode& q = spec_.questions.at(qid);
    for (Answer a : {Answer::kYes, Answer::kNo}) {
      QuestionSequence seq = prefix;
      seq.nodes.push_back(qid);
      seq.answers.push_back(a);
      const NodeRef& child = q.child(a);
      if (child.is_question()) {
        walk_raw(child.id, std::move(seq));
      } else {
        seq.terminal_code = child.id;
        raw_paths_.emplace(child.id, std::move(seq));
      }
    }
  };
  walk_raw(spec_.root, {});

  collapse(spec_, NodeRef{NodeRef::Kind::kQuestion, spec_.root}, collapsed_);
  std::function<void(const std::string&, QuestionSequence)> walk_analysis = [&](const std::string& qid, QuestionSequence prefix) {
    analysis_questions_.push_back(qid);
    const QuestionNode& q = spec_.questions.at(qid);
    std::pair<NodeRef, NodeRef> children;
    for (Answer a : {Answer::kYes, Answer::kNo}) {
      NodeRef child = collapse(spec_, q.child(a), collapsed_);
      QuestionSequence seq = prefix;
      seq.nodes.push_back(qid);
      seq.answers.push_back(a);
      if (child.is_question()) {
        analysis_parents_.emplace(child.id, std::make_pair(qid, a));
        walk_analysis(child.id, std::move(seq));
      } else {
        seq.terminal_code = child.id;
        analysis_codes_.push_back(child.id);
        analysis_paths_.emplace(child.id, std::move(seq));
      }
      (a == Answer::kYes ? children.first : children.second) = std::move(child);
    }
    analysis_children_.emplace(qid, std::move(children));
  };
  walk_analysis(spec_.root, {});
  std::sort(analysis_codes_.begin(), analysis_codes_.end(), natural_less);
  std::sort(analysis_questions_.begin(), analysis_questions_.end(), natural_less);
}

bool CodingTree::has_question(std::string_view id) const { return spec_.questions.contains(std::string(id)); }
bool CodingTree::has_code(std::string_view id) const { return spec_.codes.contains(std::string(id)); }

const QuestionNode& CodingTree::question(std::string_view id) const {
  auto it = spec_.questions.find(std::string(id));
  if (it == spec_.questions.end()) throw std::out_of_range("unknown question " + std::string(id));
  return it->second;
}

const Code& CodingTree::code(std::string_view id) const {
  auto it = spec_.codes.find(std::string(id));
  if (it == spec_.codes.end()) throw std::out_of_range("unknown code " + std::string(id));
  return it->second;
}

const NodeRef& CodingTree::step(std::string_view at, Answer a) const { return question(at).child(a); }

QuestionSequence CodingTree::tag_to_sequence(std::string_view code) const {
  if (auto it = raw_paths_.find(code); it != raw_paths_.end()) return it->second;
  if (auto it = analysis_paths_.find(code); it != analysis_paths_.end()) return it->second;
  throw std::out_of_range("code " + std::string(code) + " is not a leaf of the tree");
}

std::string CodingTree::canonical(std::string_view code) const { return canonical_of(spec_, std::string(code)); }

bool CodingTree::is_raw_leaf(std::string_view code) const { return raw_paths_.contains(code); }

bool CodingTree::is_actionable(std::string_view code) const { return this->code(canonical(code)).actionable; }

bool CodingTree::codes_equal(std::string_view a, std::string_view b) const {
  const std::string ca = canonical(a);
  const std::string cb = canonical(b);
  if (ca == cb) return true;
  if (!spec_.treat_t_tprime_as_equal) return false;
  auto is_outcome = [](const std::string& c) { return c == "T" || c == "T'"; };
  return is_outcome(ca) && is_outcome(cb);
}

CodingTree CodingTree::with_t_tprime_equal(bool on) const {
  TreeSpec copy = spec_;
  copy.treat_t_tprime_as_equal = on;
  return build(std::move(copy));
}

bool CodingTree::is_collapsed(std::string_view question) const {
  auto it = collapsed_.find(question);
  return it != collapsed_.end() && it->second;
}

const QuestionSequence& CodingTree::analysis_sequence(std::string_view canonical_code) const {
  auto it = analysis_paths_.find(canonical_code);
  if (it == analysis_paths_.end()) throw std::out_of_range("code " + std::string(canonical_code) + " is not an analysis leaf");
  return it->second;
}

const NodeRef& CodingTree::analysis_child(std::string_view question, Answer a) const {
  auto it = analysis_children_.find(question);
  if (it == analysis_children_.end()) throw std::out_of_range("unknown analysis question " + std::string(question));
  return a == Answer::kYes ? it->second.first : it->second.second;
}

std::optional<std::pair<std::string, Answer>> CodingTree::analysis_parent(std::string_view question) const {
  auto it = analysis_parents_.find(question);
  if (it == analysis_parents_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> CodingTree::raw_leaf_codes() const {
  std::vector<std::string> out;
  for (const auto& [code, seq] : raw_paths_) out.push_back(code);
  std::sort(out.begin(), out.end(), natural_less);
  return out;
}

}  // namespace sacode
