#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "leakscope/netmodel.hpp"

namespace leakscope {

/// Absolute block window. 0 in block_at means "from creation", 0 in unblock_at means "never".
struct BlockRule {
    std::string rule_id;
    DeviceId device;
    std::int64_t block_at = 0;
    std::int64_t unblock_at = 0;
    std::int64_t created_at = 0;

    bool operator==(const BlockRule&) const = default;
};

/// Half-open window [effective_block, unblock_at).
bool is_active(const BlockRule& rule, std::int64_t now);

/// Daily window in minutes after midnight UTC; end < start wraps past midnight.
struct RecurringRule {
    std::string rule_id;
    DeviceId device;
    int start_minute = 0;
    int end_minute = 0;
    std::int64_t created_at = 0;

    bool operator==(const RecurringRule&) const = default;
};

/// The absolute window this rule expands to that contains `now`, or the next one after it.
std::pair<std::int64_t, std::int64_t> expand_window(const RecurringRule& rule, std::int64_t now);
bool is_active(const RecurringRule& rule, std::int64_t now);

/// "HH:MM" (00:00..23:59) to minutes after midnight.
std::optional<int> parse_hhmm(std::string_view text);
std::string format_hhmm(int minutes);

class PolicyError : public std::runtime_error {
public:
    enum class Kind { unknown_device, invalid_window, past_window, unknown_rule };
    PolicyError(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

/// Thread-safe rule set. A device is blocked iff any of its rules is active.
class PolicyStore {
public:
    using DeviceCheck = std::function<bool(const DeviceId&)>;

    explicit PolicyStore(DeviceCheck known = {}) : known_(std::move(known)) {}

    /// Throws PolicyError(unknown_device | invalid_window | past_window).
    std::string add_rule(const DeviceId& device, std::int64_t block_at, std::int64_t unblock_at, std::int64_t now);
    /// Throws PolicyError(unknown_device | invalid_window) when start == end.
    std::string add_recurring(const DeviceId& device, int start_minute, int end_minute, std::int64_t now);
    /// Throws PolicyError(unknown_rule).
    void cancel_rule(const std::string& rule_id);

    std::set<DeviceId> blocked_set(std::int64_t now) const;
    bool is_blocked(const DeviceId& device, std::int64_t now) const;

    std::vector<BlockRule> rules() const;
    std::vector<RecurringRule> recurring_rules() const;
    std::size_t size() const;

private:
    std::string next_id();

    mutable std::mutex mu_;
    DeviceCheck known_;
    std::map<std::string, BlockRule> rules_;
    std::map<std::string, RecurringRule> recurring_;
    std::uint64_t counter_ = 0;
};

}  // namespace leakscope
