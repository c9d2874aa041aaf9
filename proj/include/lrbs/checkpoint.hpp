#pragma once

#include <cstdio>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "policy.hpp"

namespace lrbs {

// Plain-text weight files:
//   lrbs-params 1
//   kind tsp|pdp
//   temperature <t>
//   tensor theta <count>
//   <values, one per line>
//   [tensor phi <count> ...]
// Values are written with 17 significant digits so a round trip is lossless.

struct Checkpoint {
    PolicyParams params;
    std::optional<EasParams> eas;
};

inline ProblemKind parse_kind(const std::string& s)
{
    if (s == "tsp") return ProblemKind::tsp;
    if (s == "pdp") return ProblemKind::pdp;
    throw invalid_argument("unknown problem kind '" + s + "'");
}

namespace detail {

inline std::string format_double(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_tensor(std::ostream& os, const char* name, const std::vector<double>& values)
{
    os << "tensor " << name << ' ' << values.size() << '\n';
    for (double v : values) os << format_double(v) << '\n';
}

} // namespace detail

inline void write_checkpoint(std::ostream& os, const PolicyParams& params, const EasParams* eas = nullptr)
{
    params.validate();
    os << "lrbs-params 1\n";
    os << "kind " << to_string(params.kind) << '\n';
    os << "temperature " << detail::format_double(params.temperature) << '\n';
    detail::write_tensor(os, "theta", params.theta);
    if (eas) detail::write_tensor(os, "phi", eas->phi);
}

inline void save_checkpoint(const std::string& path, const PolicyParams& params, const EasParams* eas = nullptr)
{
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_checkpoint(os, params, eas);
    if (!os) throw std::runtime_error("failed writing '" + path + "'");
}

inline Checkpoint read_checkpoint(std::istream& is)
{
    int line_no = 0;
    std::string line;
    auto next = [&]() -> std::istringstream {
        if (!std::getline(is, line)) throw parse_error(line_no + 1, "unexpected end of checkpoint");
        ++line_no;
        return std::istringstream(line);
    };
    auto expect_word = [&](std::istringstream& ss, const std::string& word) {
        std::string w;
        if (!(ss >> w) || w != word) throw parse_error(line_no, "expected '" + word + "'");
    };

    Checkpoint cp;
    {
        auto ss = next();
        int version = 0;
        expect_word(ss, "lrbs-params");
        if (!(ss >> version) || version != 1) throw parse_error(line_no, "unsupported checkpoint version");
    }
    {
        auto ss = next();
        std::string kind;
        expect_word(ss, "kind");
        ss >> kind;
        try {
            cp.params.kind = parse_kind(kind);
        } catch (const invalid_argument& e) {
            throw parse_error(line_no, e.what());
        }
    }
    {
        auto ss = next();
        expect_word(ss, "temperature");
        if (!(ss >> cp.params.temperature)) throw parse_error(line_no, "bad temperature");
    }
    auto read_tensor = [&](std::istringstream& ss, std::vector<double>& out) {
        std::size_t count = 0;
        if (!(ss >> count)) throw parse_error(line_no, "bad tensor size");
        out.resize(count);
        for (auto& v : out) {
            auto vs = next();
            if (!(vs >> v)) throw parse_error(line_no, "bad tensor value");
        }
    };
    const auto& lay = layout_for(cp.params.kind);
    while (std::getline(is, line)) {
        ++line_no;
        std::istringstream ss(line);
        std::string word, name;
        if (!(ss >> word)) continue;
        if (word != "tensor" || !(ss >> name)) throw parse_error(line_no, "expected 'tensor <name> <count>'");
        if (name == "theta") {
            read_tensor(ss, cp.params.theta);
            if (cp.params.theta.size() != lay.theta_size()) throw parse_error(line_no, "theta has the wrong size");
        } else if (name == "phi") {
            EasParams eas = eas_wrap(PolicyParams::zeros(cp.params.kind));
            read_tensor(ss, eas.phi);
            if (eas.phi.size() != lay.phi_size()) throw parse_error(line_no, "phi has the wrong size");
            cp.eas = std::move(eas);
        } else {
            throw parse_error(line_no, "unknown tensor '" + name + "'");
        }
    }
    if (cp.params.theta.empty()) throw parse_error(line_no, "checkpoint has no theta tensor");
    try {
        cp.params.validate();
    } catch (const std::exception& e) {
        throw parse_error(line_no, e.what());
    }
    return cp;
}

inline Checkpoint load_checkpoint(const std::string& path)
{
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open '" + path + "'");
    return read_checkpoint(is);
}

} // namespace lrbs
