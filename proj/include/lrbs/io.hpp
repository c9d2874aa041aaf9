#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "instance.hpp"

namespace lrbs {

using AnyInstance = std::variant<Instance, PdInstance>;

// Instance files hold one or more records:
//   TSP <N>            PDP <n>
//   x y   (N lines)    x y   (2n+1 lines: depot, pickups, deliveries)
//                      [PAIRS
//                       p d  (n lines, node indices; deliveries are reordered to match)]
// Blank lines and lines starting with '#' are ignored.

namespace detail {

inline std::string fmt17(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::vector<std::string> split_ws(std::string_view s)
{
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
        const std::size_t start = i;
        while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '\r') ++i;
        if (i > start) out.emplace_back(s.substr(start, i - start));
    }
    return out;
}

template <typename T>
bool parse_number(const std::string& s, T& out)
{
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc{} && ptr == end;
}

class LineReader {
public:
    explicit LineReader(std::istream& is) : is_(is) {}

    /// Next non-blank, non-comment line split into tokens; empty at end of input.
    std::vector<std::string> next()
    {
        while (std::getline(is_, buf_)) {
            ++line_;
            auto tok = split_ws(buf_);
            if (tok.empty() || tok.front()[0] == '#') continue;
            return tok;
        }
        return {};
    }

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::istream& is_;
    std::string buf_;
    std::size_t line_ = 0;
};

inline Point read_point(LineReader& in)
{
    const auto tok = in.next();
    if (tok.empty()) throw parse_error(in.line() + 1, "unexpected end of file, expected 'x y'");
    Point p;
    if (tok.size() != 2 || !parse_number(tok[0], p.x) || !parse_number(tok[1], p.y))
        throw parse_error(in.line(), "expected two numbers 'x y'");
    if (!(p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0))
        throw validation_error("line " + std::to_string(in.line()) + ": coordinate outside the unit square");
    return p;
}

inline std::optional<AnyInstance> read_record(LineReader& in, std::vector<std::string>& pending, std::size_t& pending_line)
{
    const bool carried = !pending.empty();
    auto head = carried ? std::move(pending) : in.next();
    const std::size_t head_line = carried ? pending_line : in.line();
    pending.clear();
    if (head.empty()) return std::nullopt;
    int count = 0;
    if (head.size() != 2 || !parse_number(head[1], count))
        throw parse_error(head_line, "expected 'TSP <N>' or 'PDP <n_requests>'");

    if (head[0] == "TSP") {
        if (count < 3) throw parse_error(head_line, "TSP instances need N >= 3");
        std::vector<Point> pts;
        for (int i = 0; i < count; ++i) pts.push_back(read_point(in));
        return Instance(std::move(pts));
    }
    if (head[0] != "PDP") throw parse_error(head_line, "unknown record type '" + head[0] + "'");
    if (count < 1) throw parse_error(head_line, "PDP instances need at least one request");

    const Point depot = read_point(in);
    std::vector<Point> pickups, deliveries;
    for (int i = 0; i < count; ++i) pickups.push_back(read_point(in));
    for (int i = 0; i < count; ++i) deliveries.push_back(read_point(in));

    auto tok = in.next();
    if (!tok.empty() && tok.size() == 1 && tok[0] == "PAIRS") {
        std::vector<int> delivery_of(static_cast<std::size_t>(count), -1);
        std::vector<char> delivery_used(static_cast<std::size_t>(count), 0);
        for (int i = 0; i < count; ++i) {
            const auto pair = in.next();
            int p = 0, d = 0;
            if (pair.size() != 2 || !parse_number(pair[0], p) || !parse_number(pair[1], d))
                throw parse_error(in.line() + (pair.empty() ? 1 : 0), "expected a pair 'pickup delivery'");
            if (p < 1 || p > count) throw parse_error(in.line(), "pickup index out of range");
            if (d <= count || d > 2 * count) throw parse_error(in.line(), "delivery index out of range");
            auto& slot = delivery_of[static_cast<std::size_t>(p - 1)];
            if (slot != -1) throw parse_error(in.line(), "pickup " + std::to_string(p) + " is paired twice");
            auto& used = delivery_used[static_cast<std::size_t>(d - count - 1)];
            if (used) throw parse_error(in.line(), "delivery " + std::to_string(d) + " is paired twice");
            slot = d - count - 1;
            used = 1;
        }
        std::vector<Point> ordered;
        for (int r = 0; r < count; ++r) ordered.push_back(deliveries[static_cast<std::size_t>(delivery_of[static_cast<std::size_t>(r)])]);
        deliveries = std::move(ordered);
    } else {
        pending = std::move(tok);
        pending_line = in.line();
    }
    return PdInstance(depot, pickups, deliveries);
}

} // namespace detail

inline void write_instance(std::ostream& os, const Instance& inst)
{
    os << "TSP " << inst.size() << '\n';
    for (const auto& p : inst.coords()) os << detail::fmt17(p.x) << ' ' << detail::fmt17(p.y) << '\n';
}

inline void write_instance(std::ostream& os, const PdInstance& inst)
{
    os << "PDP " << inst.requests() << '\n';
    for (const auto& p : inst.coords()) os << detail::fmt17(p.x) << ' ' << detail::fmt17(p.y) << '\n';
}

inline void write_instance(std::ostream& os, const AnyInstance& inst)
{
    std::visit([&](const auto& i) { write_instance(os, i); }, inst);
}

inline std::vector<AnyInstance> read_dataset(std::istream& is)
{
    detail::LineReader in(is);
    std::vector<std::string> pending;
    std::size_t pending_line = 0;
    std::vector<AnyInstance> out;
    while (auto rec = detail::read_record(in, pending, pending_line)) out.push_back(std::move(*rec));
    return out;
}

inline std::vector<AnyInstance> read_dataset(const std::string& path)
{
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open '" + path + "'");
    return read_dataset(is);
}

inline void write_dataset(const std::string& path, const std::vector<AnyInstance>& data)
{
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    for (const auto& inst : data) write_instance(os, inst);
    if (!os) throw std::runtime_error("failed writing '" + path + "'");
}

/// Reads a file holding exactly one instance.
inline AnyInstance read_instance(std::istream& is)
{
    auto data = read_dataset(is);
    if (data.size() != 1) throw parse_error(1, "expected exactly one instance, found " + std::to_string(data.size()));
    return std::move(data.front());
}

inline AnyInstance read_instance(const std::string& path)
{
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open '" + path + "'");
    return read_instance(is);
}

inline void write_instance(const std::string& path, const AnyInstance& inst)
{
    write_dataset(path, {inst});
}

// ---------------------------------------------------------------------------
// Results CSV

inline constexpr const char* results_header = "instance_id,method,obj,opt,gap_percent,steps,seconds";

/// One (method, instance) cell. Failed cells keep obj empty and carry the message.
struct ResultRow {
    std::string instance_id;
    std::string method;
    std::optional<double> obj;
    std::optional<double> opt;
    std::optional<double> gap_percent;
    long long steps = 0;
    double seconds = 0.0;
    std::string error;

    [[nodiscard]] bool ok() const noexcept { return obj.has_value(); }
};

namespace detail {

inline std::string opt_field(const std::optional<double>& v) { return v ? fmt17(*v) : std::string(); }

inline std::vector<std::string> split_csv(const std::string& line)
{
    std::vector<std::string> out(1);
    for (char c : line) {
        if (c == ',') out.emplace_back();
        else if (c != '\r') out.back() += c;
    }
    return out;
}

} // namespace detail

inline std::string format_result_row(const ResultRow& r)
{
    char secs[32];
    std::snprintf(secs, sizeof secs, "%.6f", r.seconds);
    return r.instance_id + ',' + r.method + ',' + detail::opt_field(r.obj) + ',' + detail::opt_field(r.opt) + ',' +
           detail::opt_field(r.gap_percent) + ',' + std::to_string(r.steps) + ',' + secs;
}

inline std::vector<ResultRow> read_results(std::istream& is)
{
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(is, line)) return {};
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != results_header) throw parse_error(1, "unexpected results header");
    std::vector<ResultRow> rows;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = detail::split_csv(line);
        if (f.size() != 7) throw parse_error(line_no, "expected 7 fields");
        ResultRow r;
        r.instance_id = f[0];
        r.method = f[1];
        auto num = [&](const std::string& s, std::optional<double>& out) {
            if (s.empty()) return;
            double v = 0.0;
            if (!detail::parse_number(s, v)) throw parse_error(line_no, "bad number '" + s + "'");
            out = v;
        };
        num(f[2], r.obj);
        num(f[3], r.opt);
        num(f[4], r.gap_percent);
        if (!detail::parse_number(f[5], r.steps)) throw parse_error(line_no, "bad step count");
        if (!detail::parse_number(f[6], r.seconds)) throw parse_error(line_no, "bad seconds");
        rows.push_back(std::move(r));
    }
    return rows;
}

inline std::vector<ResultRow> read_results(const std::string& path)
{
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open '" + path + "'");
    return read_results(is);
}

inline void write_results(std::ostream& os, const std::vector<ResultRow>& rows)
{
    os << results_header << '\n';
    for (const auto& r : rows) os << format_result_row(r) << '\n';
}

/// Reference costs: CSV with header `instance_id,opt`.
inline std::map<std::string, double> read_references(const std::string& path)
{
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open '" + path + "'");
    std::string line;
    std::size_t line_no = 0;
    std::map<std::string, double> out;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || (line_no == 1 && line == "instance_id,opt")) continue;
        const auto f = detail::split_csv(line);
        double v = 0.0;
        if (f.size() != 2 || !detail::parse_number(f[1], v) || !(v > 0.0))
            throw parse_error(line_no, "expected 'instance_id,opt' with a positive cost");
        out[f[0]] = v;
    }
    return out;
}

} // namespace lrbs
