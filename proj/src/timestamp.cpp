#include "ripple/timestamp.hpp"

#include "ripple/error.hpp"

#include <cctype>
#include <fmt/format.h>

namespace ripple {

namespace {

class Cursor {
public:
    explicit Cursor(std::string_view s) : s_(s) {}

    int digits(int n) {
        int v = 0;
        for (int i = 0; i < n; ++i) {
            if (pos_ >= s_.size() || !std::isdigit(static_cast<unsigned char>(s_[pos_])))
                fail();
            v = v * 10 + (s_[pos_++] - '0');
        }
        return v;
    }
    bool accept(char c) {
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }
    void expect(char c) {
        if (!accept(c)) fail();
    }
    bool done() const { return pos_ == s_.size(); }
    char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
    [[noreturn]] void fail() const {
        throw ParseError(fmt::format("invalid timestamp '{}'", s_));
    }

private:
    std::string_view s_;
    std::size_t pos_ = 0;
};

}  // namespace

Timestamp parse_timestamp(std::string_view text) {
    using namespace std::chrono;
    Cursor c(text);
    const int y = c.digits(4);
    c.expect('-');
    const int mo = c.digits(2);
    c.expect('-');
    const int d = c.digits(2);
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) c.fail();
    long long secs = 0;
    if (!c.done()) {
        if (!c.accept('T') && !c.accept(' ')) c.fail();
        const int hh = c.digits(2);
        c.expect(':');
        const int mm = c.digits(2);
        int ss = 0;
        if (c.accept(':')) ss = c.digits(2);
        if (hh > 23 || mm > 59 || ss > 60) c.fail();
        if (c.accept('.')) {
            while (std::isdigit(static_cast<unsigned char>(c.peek()))) c.digits(1);
        }
        secs = hh * 3600LL + mm * 60LL + ss;
        if (c.accept('Z') || c.accept('z')) {
        } else if (c.peek() == '+' || c.peek() == '-') {
            const int sign = c.accept('+') ? 1 : (c.expect('-'), -1);
            const int oh = c.digits(2);
            c.accept(':');
            const int om = c.digits(2);
            secs -= sign * (oh * 3600LL + om * 60LL);
        }
        // Naive times are taken as UTC.
    }
    if (!c.done()) c.fail();
    return Timestamp{sys_days{ymd}.time_since_epoch() + seconds{secs}};
}

std::string format_timestamp(Timestamp ts) {
    using namespace std::chrono;
    const auto day_point = floor<days>(ts);
    const year_month_day ymd{day_point};
    const hh_mm_ss hms{ts - day_point};
    return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}Z", static_cast<int>(ymd.year()),
                       static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                       hms.hours().count(), hms.minutes().count(), hms.seconds().count());
}

}  // namespace ripple
