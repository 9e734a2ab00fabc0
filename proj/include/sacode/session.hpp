#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "sacode/records.hpp"
#include "sacode/tree.hpp"

namespace sacode {

enum class AnswerChoice { kYes, kNo, kBoth };

std::string to_string(AnswerChoice c);
AnswerChoice answer_choice_from_string(std::string_view s);

class SessionError : public std::runtime_error {
 public:
  enum class Kind {
    kInvalidArgument,
    kUnknownItem,
    kNotCursor,     // answered a question other than the item's current one
    kSecondFork,    // `both` used twice on one item
    kForkRefused,   // `both` at a node whose branches reach the same code
    kFinalized,     // mutation of a finalized item
    kNotComplete,   // finalize with an unreached leaf
    kNothingToUndo,
    kBadSublabel,
    kMismatch,      // persisted session does not match tree/dataset
  };
  SessionError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct LogEntry {
  enum class Op { kAnswer, kSublabel, kIotFlag, kFinalize };
  Op op = Op::kAnswer;
  std::string question;
  AnswerChoice choice = AnswerChoice::kYes;
  std::size_t tag_position = 0;
  std::string label;
  bool flag = false;

  friend bool operator==(const LogEntry&, const LogEntry&) = default;
};

nlohmann::json to_json(const LogEntry& e);
LogEntry log_entry_from_json(const nlohmann::json& j);

enum class ItemStatus { kPending, kInProgress, kComplete, kFinalized };
std::string to_string(ItemStatus s);

/// State of one item, derived by replaying its answer log against the tree.
struct ItemState {
  ItemStatus status = ItemStatus::kPending;
  std::optional<std::string> cursor;  // question awaiting an answer
  std::vector<Tag> tags;              // leaves reached so far, in order
  std::optional<std::string> fork_question;
  bool second_branch_pending = false;
  bool iot_specific = false;
  // Partial answer trail of the branch currently being walked.
  QuestionSequence active_path;

  friend bool operator==(const ItemState&, const ItemState&) = default;
};

/// A single coder working through a dataset with one coding tree.
///
/// Each item keeps an ordered log of operations; its state is always the
/// replay of that log, so undo is a pop followed by a replay. A separate
/// append-only audit trail keeps every operation including undos.
class Session {
 public:
  static Session start(std::shared_ptr<const CodingTree> tree, std::shared_ptr<const Dataset> dataset,
                       std::string coder_id, std::string session_id = "session");

  const std::string& id() const { return id_; }
  const std::string& coder_id() const { return coder_id_; }
  const CodingTree& tree() const { return *tree_; }
  const Dataset& dataset() const { return *dataset_; }
  const AdviceItem& item(int item_index) const;

  ItemState answer(int item_index, std::string_view question_id, AnswerChoice choice);
  ItemState set_sublabel(int item_index, std::size_t tag_position, const std::string& label);
  ItemState set_iot_specific(int item_index, bool value);
  TagRecord finalize_item(int item_index);
  ItemState undo(int item_index);

  ItemState state(int item_index) const;
  const std::vector<LogEntry>& log(int item_index) const;
  std::size_t revision() const { return audit_.size(); }
  std::size_t finalized_count() const;
  std::optional<int> first_unfinished_item() const;

  CoderRecordSet export_records() const;

  nlohmann::json to_json() const;
  static Session from_json(const nlohmann::json& doc, std::shared_ptr<const CodingTree> tree,
                           std::shared_ptr<const Dataset> dataset);

 private:
  struct AuditEntry {
    int item_index = 0;
    bool undo = false;
    LogEntry entry;
    std::string at;
  };

  Session() = default;
  std::vector<LogEntry>& mutable_log(int item_index);
  void record(int item_index, const LogEntry& e);
  void touch();

  std::string id_;
  std::string coder_id_;
  std::shared_ptr<const CodingTree> tree_;
  std::shared_ptr<const Dataset> dataset_;
  std::map<int, std::size_t> position_;  // item index -> dataset position
  std::map<int, std::vector<LogEntry>> logs_;
  std::vector<AuditEntry> audit_;
  std::string created_at_;
  std::string updated_at_;
};

/// Replays an item's log from scratch. Throws SessionError on the first invalid entry.
ItemState replay(const CodingTree& tree, const std::vector<LogEntry>& log);

/// Applies one entry to a derived state. Throws SessionError when the entry is not allowed.
ItemState apply(const CodingTree& tree, const ItemState& state, const LogEntry& entry);

std::string utc_timestamp(std::chrono::system_clock::time_point t = std::chrono::system_clock::now());

}  // namespace sacode
