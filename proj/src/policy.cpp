#include "leakscope/policy.hpp"

#include <charconv>
#include <cstdio>

namespace leakscope {

namespace {

constexpr std::int64_t kDay = 86400;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    const std::int64_t q = a / b;
    return (a % b != 0 && (a < 0) != (b < 0)) ? q - 1 : q;
}

}  // namespace

bool is_active(const BlockRule& rule, std::int64_t now) {
    const std::int64_t begin = rule.block_at == 0 ? rule.created_at : rule.block_at;
    return begin <= now && (rule.unblock_at == 0 || now < rule.unblock_at);
}

std::pair<std::int64_t, std::int64_t> expand_window(const RecurringRule& rule, std::int64_t now) {
    const std::int64_t midnight = floor_div(now, kDay) * kDay;
    const std::int64_t start = rule.start_minute * 60;
    std::int64_t end = rule.end_minute * 60;
    if (end <= start) end += kDay;
    // Candidates: the window that started yesterday (may still be open) and today's.
    for (std::int64_t base : {midnight - kDay, midnight, midnight + kDay}) {
        if (now < base + end) return {base + start, base + end};
    }
    return {midnight + kDay + start, midnight + kDay + end};
}

bool is_active(const RecurringRule& rule, std::int64_t now) {
    if (now < rule.created_at) return false;
    const auto [begin, end] = expand_window(rule, now);
    return begin <= now && now < end;
}

std::optional<int> parse_hhmm(std::string_view text) {
    if (text.size() != 5 || text[2] != ':') return std::nullopt;
    int h = 0, m = 0;
    auto r1 = std::from_chars(text.data(), text.data() + 2, h);
    auto r2 = std::from_chars(text.data() + 3, text.data() + 5, m);
    if (r1.ec != std::errc{} || r1.ptr != text.data() + 2 || r2.ec != std::errc{} || r2.ptr != text.data() + 5) {
        return std::nullopt;
    }
    if (h < 0 || h > 23 || m < 0 || m > 59) return std::nullopt;
    return h * 60 + m;
}

std::string format_hhmm(int minutes) {
    const int m = ((minutes % 1440) + 1440) % 1440;
    char buf[8];
    std::snprintf(buf, sizeof buf, "%02d:%02d", m / 60, m % 60);
    return buf;
}

std::string PolicyStore::next_id() { return "rule-" + std::to_string(++counter_); }

std::string PolicyStore::add_rule(const DeviceId& device, std::int64_t block_at, std::int64_t unblock_at,
                                  std::int64_t now) {
    if (known_ && !known_(device)) {
        throw PolicyError(PolicyError::Kind::unknown_device, "unknown device " + device.str());
    }
    if (block_at < 0 || unblock_at < 0) throw PolicyError(PolicyError::Kind::invalid_window, "negative time");
    if (unblock_at != 0 && block_at != 0 && unblock_at <= block_at) {
        throw PolicyError(PolicyError::Kind::invalid_window, "unblock time must be after block time");
    }
    if (unblock_at != 0 && unblock_at <= now) {
        throw PolicyError(PolicyError::Kind::past_window, "window already ended");
    }
    std::lock_guard lock(mu_);
    BlockRule rule{next_id(), device, block_at, unblock_at, now};
    rules_.emplace(rule.rule_id, rule);
    return rule.rule_id;
}

std::string PolicyStore::add_recurring(const DeviceId& device, int start_minute, int end_minute, std::int64_t now) {
    if (known_ && !known_(device)) {
        throw PolicyError(PolicyError::Kind::unknown_device, "unknown device " + device.str());
    }
    if (start_minute == end_minute || start_minute < 0 || end_minute < 0 || start_minute >= 1440 || end_minute >= 1440) {
        throw PolicyError(PolicyError::Kind::invalid_window, "daily window must have distinct start and end");
    }
    std::lock_guard lock(mu_);
    RecurringRule rule{next_id(), device, start_minute, end_minute, now};
    recurring_.emplace(rule.rule_id, rule);
    return rule.rule_id;
}

void PolicyStore::cancel_rule(const std::string& rule_id) {
    std::lock_guard lock(mu_);
    if (rules_.erase(rule_id) == 0 && recurring_.erase(rule_id) == 0) {
        throw PolicyError(PolicyError::Kind::unknown_rule, "unknown rule " + rule_id);
    }
}

std::set<DeviceId> PolicyStore::blocked_set(std::int64_t now) const {
    std::lock_guard lock(mu_);
    std::set<DeviceId> out;
    for (const auto& [id, r] : rules_) {
        if (is_active(r, now)) out.insert(r.device);
    }
    for (const auto& [id, r] : recurring_) {
        if (is_active(r, now)) out.insert(r.device);
    }
    return out;
}

bool PolicyStore::is_blocked(const DeviceId& device, std::int64_t now) const {
    return blocked_set(now).count(device) > 0;
}

std::vector<BlockRule> PolicyStore::rules() const {
    std::lock_guard lock(mu_);
    std::vector<BlockRule> out;
    for (const auto& [id, r] : rules_) out.push_back(r);
    return out;
}

std::vector<RecurringRule> PolicyStore::recurring_rules() const {
    std::lock_guard lock(mu_);
    std::vector<RecurringRule> out;
    for (const auto& [id, r] : recurring_) out.push_back(r);
    return out;
}

std::size_t PolicyStore::size() const {
    std::lock_guard lock(mu_);
    return rules_.size() + recurring_.size();
}

}  // namespace leakscope
