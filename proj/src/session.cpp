#include "sacode/session.hpp"

#include <algorithm>
#include <ctime>

namespace sacode {

using nlohmann::json;

std::string to_string(AnswerChoice c) {
  switch (c) {
    case AnswerChoice::kYes: return "yes";
    case AnswerChoice::kNo: return "no";
    case AnswerChoice::kBoth: return "both";
  }
  return "?";
}

AnswerChoice answer_choice_from_string(std::string_view s) {
  if (s == "yes" || s == "Y" || s == "y") return AnswerChoice::kYes;
  if (s == "no" || s == "N" || s == "n") return AnswerChoice::kNo;
  if (s == "both" || s == "B" || s == "b") return AnswerChoice::kBoth;
  throw SessionError(SessionError::Kind::kInvalidArgument, "answer must be yes, no or both, got '" + std::string(s) + "'");
}

std::string to_string(ItemStatus s) {
  switch (s) {
    case ItemStatus::kPending: return "pending";
    case ItemStatus::kInProgress: return "in_progress";
    case ItemStatus::kComplete: return "complete";
    case ItemStatus::kFinalized: return "finalized";
  }
  return "?";
}

json to_json(const LogEntry& e) {
  switch (e.op) {
    case LogEntry::Op::kAnswer: return json{{"op", "answer"}, {"q", e.question}, {"a", to_string(e.choice)}};
    case LogEntry::Op::kSublabel: return json{{"op", "sublabel"}, {"tag", e.tag_position}, {"label", e.label}};
    case LogEntry::Op::kIotFlag: return json{{"op", "iot"}, {"value", e.flag}};
    case LogEntry::Op::kFinalize: return json{{"op", "finalize"}};
  }
  return {};
}

LogEntry log_entry_from_json(const json& j) {
  LogEntry e;
  const std::string op = j.at("op").get<std::string>();
  if (op == "answer") {
    e.op = LogEntry::Op::kAnswer;
    e.question = j.at("q").get<std::string>();
    e.choice = answer_choice_from_string(j.at("a").get<std::string>());
  } else if (op == "sublabel") {
    e.op = LogEntry::Op::kSublabel;
    e.tag_position = j.at("tag").get<std::size_t>();
    e.label = j.at("label").get<std::string>();
  } else if (op == "iot") {
    e.op = LogEntry::Op::kIotFlag;
    e.flag = j.at("value").get<bool>();
  } else if (op == "finalize") {
    e.op = LogEntry::Op::kFinalize;
  } else {
    throw SessionError(SessionError::Kind::kInvalidArgument, "unknown log op '" + op + "'");
  }
  return e;
}

std::string utc_timestamp(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace {

using Kind = SessionError::Kind;

// Moves the active branch across one answered edge, handling leaf arrival and
// resumption of a pending second branch.
void advance(const CodingTree& tree, ItemState& s, const std::string& question, Answer a) {
  s.active_path.nodes.push_back(question);
  s.active_path.answers.push_back(a);
  const NodeRef& child = tree.step(question, a);
  if (child.is_question()) {
    s.cursor = child.id;
    s.status = ItemStatus::kInProgress;
    return;
  }
  QuestionSequence reached = s.active_path;
  reached.terminal_code = child.id;
  s.tags.push_back(Tag{child.id, std::move(reached), {}});
  s.active_path = {};
  s.cursor.reset();
  s.status = ItemStatus::kComplete;
  if (!s.second_branch_pending) return;

  s.second_branch_pending = false;
  const QuestionSequence& first = s.tags.front().sequence;
  const auto fork_at = std::find(first.nodes.begin(), first.nodes.end(), *s.fork_question) - first.nodes.begin();
  s.active_path.nodes.assign(first.nodes.begin(), first.nodes.begin() + fork_at);
  s.active_path.answers.assign(first.answers.begin(), first.answers.begin() + fork_at);
  advance(tree, s, *s.fork_question, Answer::kNo);
}

}  // namespace

ItemState apply(const CodingTree& tree, const ItemState& state, const LogEntry& entry) {
  if (state.status == ItemStatus::kFinalized) throw SessionError(Kind::kFinalized, "item is finalized; undo first");
  ItemState s = state;
  switch (entry.op) {
    case LogEntry::Op::kAnswer: {
      if (!s.cursor) throw SessionError(Kind::kNotCursor, "no question is pending for this item");
      if (entry.question != *s.cursor) {
        throw SessionError(Kind::kNotCursor, "question " + entry.question + " is not the current question " + *s.cursor);
      }
      if (entry.choice == AnswerChoice::kBoth) {
        if (s.fork_question) throw SessionError(Kind::kSecondFork, "both may be answered at most once per item");
        if (tree.is_collapsed(entry.question)) {
          throw SessionError(Kind::kForkRefused, "both branches of " + entry.question + " lead to the same code");
        }
        s.fork_question = entry.question;
        s.second_branch_pending = true;
        advance(tree, s, entry.question, Answer::kYes);
      } else {
        advance(tree, s, entry.question, entry.choice == AnswerChoice::kYes ? Answer::kYes : Answer::kNo);
      }
      return s;
    }
    case LogEntry::Op::kSublabel: {
      if (entry.tag_position >= s.tags.size()) {
        throw SessionError(Kind::kBadSublabel, "no tag at position " + std::to_string(entry.tag_position));
      }
      Tag& tag = s.tags[entry.tag_position];
      auto allows = [&](const std::string& code) {
        const auto& labels = tree.code(code).sublabels;
        return std::find(labels.begin(), labels.end(), entry.label) != labels.end();
      };
      if (!allows(tag.code) && !allows(tree.canonical(tag.code))) {
        throw SessionError(Kind::kBadSublabel, "sublabel '" + entry.label + "' is not available on code " + tag.code);
      }
      tag.sublabels.insert(entry.label);
      return s;
    }
    case LogEntry::Op::kIotFlag:
      s.iot_specific = entry.flag;
      return s;
    case LogEntry::Op::kFinalize:
      if (s.status != ItemStatus::kComplete) throw SessionError(Kind::kNotComplete, "item has an unreached leaf");
      s.status = ItemStatus::kFinalized;
      return s;
  }
  return s;
}

ItemState replay(const CodingTree& tree, const std::vector<LogEntry>& log) {
  ItemState s;
  s.cursor = tree.root();
  for (const auto& e : log) s = apply(tree, s, e);
  return s;
}

Session Session::start(std::shared_ptr<const CodingTree> tree, std::shared_ptr<const Dataset> dataset,
                       std::string coder_id, std::string session_id) {
  if (!tree) throw SessionError(Kind::kInvalidArgument, "no coding tree");
  if (!dataset || dataset->empty()) throw SessionError(Kind::kInvalidArgument, "dataset is empty");
  if (coder_id.empty()) throw SessionError(Kind::kInvalidArgument, "coder id is empty");
  Session s;
  s.id_ = std::move(session_id);
  s.coder_id_ = std::move(coder_id);
  s.tree_ = std::move(tree);
  s.dataset_ = std::move(dataset);
  for (std::size_t i = 0; i < s.dataset_->size(); ++i) {
    if (!s.position_.emplace((*s.dataset_)[i].index, i).second) {
      throw SessionError(Kind::kInvalidArgument, "duplicate item index " + std::to_string((*s.dataset_)[i].index));
    }
  }
  s.created_at_ = s.updated_at_ = utc_timestamp();
  return s;
}

const AdviceItem& Session::item(int item_index) const {
  auto it = position_.find(item_index);
  if (it == position_.end()) throw SessionError(Kind::kUnknownItem, "no item with index " + std::to_string(item_index));
  return (*dataset_)[it->second];
}

const std::vector<LogEntry>& Session::log(int item_index) const {
  static const std::vector<LogEntry> kEmpty;
  item(item_index);
  auto it = logs_.find(item_index);
  return it == logs_.end() ? kEmpty : it->second;
}

std::vector<LogEntry>& Session::mutable_log(int item_index) {
  item(item_index);
  return logs_[item_index];
}

ItemState Session::state(int item_index) const { return replay(*tree_, log(item_index)); }

void Session::touch() { updated_at_ = utc_timestamp(); }

void Session::record(int item_index, const LogEntry& e) {
  apply(*tree_, state(item_index), e);
  mutable_log(item_index).push_back(e);
  audit_.push_back({item_index, false, e, utc_timestamp()});
  touch();
}

ItemState Session::answer(int item_index, std::string_view question_id, AnswerChoice choice) {
  LogEntry e;
  e.op = LogEntry::Op::kAnswer;
  e.question = std::string(question_id);
  e.choice = choice;
  record(item_index, e);
  return state(item_index);
}

ItemState Session::set_sublabel(int item_index, std::size_t tag_position, const std::string& label) {
  LogEntry e;
  e.op = LogEntry::Op::kSublabel;
  e.tag_position = tag_position;
  e.label = label;
  record(item_index, e);
  return state(item_index);
}

ItemState Session::set_iot_specific(int item_index, bool value) {
  LogEntry e;
  e.op = LogEntry::Op::kIotFlag;
  e.flag = value;
  record(item_index, e);
  return state(item_index);
}

TagRecord Session::finalize_item(int item_index) {
  LogEntry e;
  e.op = LogEntry::Op::kFinalize;
  record(item_index, e);
  ItemState s = state(item_index);
  return TagRecord{item_index, coder_id_, s.tags, s.iot_specific};
}

ItemState Session::undo(int item_index) {
  auto& entries = mutable_log(item_index);
  if (entries.empty()) throw SessionError(Kind::kNothingToUndo, "item " + std::to_string(item_index) + " has no answers");
  auto pop = [&] {
    audit_.push_back({item_index, true, entries.back(), utc_timestamp()});
    entries.pop_back();
  };
  if (entries.back().op == LogEntry::Op::kFinalize) {
    // Un-finalizing rewinds to the last answered question.
    pop();
    while (!entries.empty()) {
      const bool was_answer = entries.back().op == LogEntry::Op::kAnswer;
      pop();
      if (was_answer) break;
    }
  } else {
    pop();
  }
  touch();
  return state(item_index);
}

std::size_t Session::finalized_count() const {
  std::size_t n = 0;
  for (const auto& [ix, entries] : logs_) {
    if (!entries.empty() && entries.back().op == LogEntry::Op::kFinalize) ++n;
  }
  return n;
}

std::optional<int> Session::first_unfinished_item() const {
  for (const auto& item : *dataset_) {
    if (state(item.index).status != ItemStatus::kFinalized) return item.index;
  }
  return std::nullopt;
}

CoderRecordSet Session::export_records() const {
  CoderRecordSet out;
  out.coder_id = coder_id_;
  for (const auto& [ix, entries] : logs_) {
    ItemState s = replay(*tree_, entries);
    if (s.status == ItemStatus::kFinalized) out.records.push_back(TagRecord{ix, coder_id_, s.tags, s.iot_specific});
  }
  out.complete = out.records.size() == dataset_->size();
  return out;
}

json Session::to_json() const {
  json items = json::object();
  for (const auto& [ix, entries] : logs_) {
    if (entries.empty()) continue;
    json arr = json::array();
    for (const auto& e : entries) arr.push_back(sacode::to_json(e));
    items[std::to_string(ix)] = std::move(arr);
  }
  json audit = json::array();
  for (const auto& a : audit_) {
    audit.push_back(json{{"item", a.item_index}, {"undo", a.undo}, {"entry", sacode::to_json(a.entry)}, {"at", a.at}});
  }
  return json{{"session_id", id_},     {"coder_id", coder_id_},          {"tree_hash", tree_->hash()},
              {"dataset_hash", dataset_hash(*dataset_)}, {"created_at", created_at_}, {"updated_at", updated_at_},
              {"items", items},        {"audit", audit}};
}

Session Session::from_json(const json& doc, std::shared_ptr<const CodingTree> tree, std::shared_ptr<const Dataset> dataset) {
  Session s = start(tree, dataset, doc.at("coder_id").get<std::string>(), doc.at("session_id").get<std::string>());
  if (doc.at("tree_hash").get<std::string>() != tree->hash()) {
    throw SessionError(Kind::kMismatch, "session was recorded against a different coding tree");
  }
  if (doc.at("dataset_hash").get<std::string>() != dataset_hash(*dataset)) {
    throw SessionError(Kind::kMismatch, "session was recorded against a different dataset");
  }
  for (const auto& a : doc.at("audit")) {
    AuditEntry entry{a.at("item").get<int>(), a.at("undo").get<bool>(), log_entry_from_json(a.at("entry")),
                     a.at("at").get<std::string>()};
    auto& entries = s.mutable_log(entry.item_index);
    if (entry.undo) {
      if (entries.empty() || !(entries.back() == entry.entry)) {
        throw SessionError(Kind::kMismatch, "audit trail undo does not match the log");
      }
      entries.pop_back();
    } else {
      apply(*tree, replay(*tree, entries), entry.entry);
      entries.push_back(entry.entry);
    }
    s.audit_.push_back(std::move(entry));
  }
  if (auto it = doc.find("items"); it != doc.end()) {
    for (const auto& [key, arr] : it->items()) {
      std::vector<LogEntry> stored;
      for (const auto& e : arr) stored.push_back(log_entry_from_json(e));
      if (s.log(std::stoi(key)) != stored) throw SessionError(Kind::kMismatch, "item " + key + " log disagrees with audit trail");
    }
  }
  s.created_at_ = doc.value("created_at", s.created_at_);
  s.updated_at_ = doc.value("updated_at", s.updated_at_);
  return s;
}

}  // namespace sacode
