#include "mtd/io.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace mtd::io {

namespace {

void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& buf, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(buf, bits);
}

class BinReader {
  public:
    BinReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw DataError("cannot open '" + path + "': " + std::strerror(errno));
    }

    void read(char* dst, std::size_t n) {
        in_.read(dst, static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n)
            throw DataError("'" + path_ + "': truncated at byte offset " + std::to_string(offset_));
        offset_ += n;
    }

    std::uint32_t u32() {
        char b[4];
        read(b, 4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[i]);
        return v;
    }

    std::uint64_t u64() {
        char b[8];
        read(b, 8);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[i]);
        return v;
    }

    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }

    std::size_t offset() const { return offset_; }
    const std::string& path() const { return path_; }

  private:
    std::string path_;
    std::ifstream in_;
    std::size_t offset_ = 0;
};

void write_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + path + "' for writing: " + std::strerror(errno));
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw DataError("write failed for '" + path + "'");
}

// Whitespace-token reader over a text file, tracking byte offsets for error
// messages.
class TextReader {
  public:
    TextReader(const std::string& path) : path_(path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw DataError("cannot open '" + path + "': " + std::strerror(errno));
        std::ostringstream ss;
        ss << in.rdbuf();
        data_ = ss.str();
    }

    bool next_token(std::string& tok) {
        while (pos_ < data_.size() && std::isspace(static_cast<unsigned char>(data_[pos_]))) ++pos_;
        if (pos_ >= data_.size()) return false;
        token_offset_ = pos_;
        const std::size_t start = pos_;
        while (pos_ < data_.size() && !std::isspace(static_cast<unsigned char>(data_[pos_]))) ++pos_;
        tok = data_.substr(start, pos_ - start);
        return true;
    }

    double expect_double() {
        std::string tok;
        if (!next_token(tok)) fail("unexpected end of file, expected a number");
        char* end = nullptr;
        errno = 0;
        const double v = std::strtod(tok.c_str(), &end);
        if (errno != 0 || end != tok.c_str() + tok.size())
            fail("'" + tok + "' is not a number");
        return v;
    }

    std::int64_t expect_int() {
        std::string tok;
        if (!next_token(tok)) fail("unexpected end of file, expected an integer");
        char* end = nullptr;
        errno = 0;
        const long long v = std::strtoll(tok.c_str(), &end, 10);
        if (errno != 0 || end != tok.c_str() + tok.size())
            fail("'" + tok + "' is not an integer");
        return v;
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw DataError("'" + path_ + "' at byte offset " + std::to_string(token_offset_) + ": " + msg);
    }

    const std::string& path() const { return path_; }

  private:
    std::string path_;
    std::string data_;
    std::size_t pos_ = 0;
    std::size_t token_offset_ = 0;
};

}  // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_measurement(const std::string& path, const Measurement& y) {
    y.validate();
    std::string buf;
    buf.reserve(28 + 8 * static_cast<std::size_t>(y.N()));
    buf += "MTDM";
    put_u32(buf, 1);
    put_u64(buf, static_cast<std::uint64_t>(y.N()));
    put_u64(buf, static_cast<std::uint64_t>(y.L));
    put_f64(buf, y.sigma);
    for (std::int64_t i = 0; i < y.N(); ++i) put_f64(buf, y.samples[i]);
    write_file(path, buf);
}

Measurement read_measurement(const std::string& path) {
    BinReader in(path);
    char magic[4];
    in.read(magic, 4);
    if (std::memcmp(magic, "MTDM", 4) != 0)
        throw DataError("'" + path + "': bad magic bytes at byte offset 0");
    const std::uint32_t version = in.u32();
    if (version != 1)
        throw DataError("'" + path + "': unsupported version " + std::to_string(version) +
                        " at byte offset 4");
    Measurement y;
    const auto N = static_cast<std::int64_t>(in.u64());
    y.L = static_cast<int>(in.u64());
    y.sigma = in.f64();
    if (N < 0 || y.L <= 0 || N < y.L)
        throw DataError("'" + path + "': inconsistent N or L in header");
    y.samples.resize(N);
    for (std::int64_t i = 0; i < N; ++i) y.samples[i] = in.f64();
    y.validate();
    return y;
}

void write_signal(const std::string& path, const Signal& x) {
    std::string buf;
    for (int i = 0; i < x.length(); ++i) {
        buf += format_double(x.values[i]);
        buf += '\n';
    }
    write_file(path, buf);
}

Signal read_signal(const std::string& path) {
    TextReader in(path);
    std::vector<double> vals;
    std::string tok;
    while (in.next_token(tok)) {
        char* end = nullptr;
        errno = 0;
        const double v = std::strtod(tok.c_str(), &end);
        if (errno != 0 || end != tok.c_str() + tok.size()) in.fail("'" + tok + "' is not a number");
        vals.push_back(v);
    }
    if (vals.empty()) throw DataError("'" + path + "': empty signal file");
    Signal x;
    x.values = Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
    x.validate();
    return x;
}

void write_support(const std::string& path, const SupportSequence& s) {
    std::string buf;
    for (const std::int64_t v : s.starts) {
        buf += std::to_string(v);
        buf += '\n';
    }
    write_file(path, buf);
}

SupportSequence read_support(const std::string& path, std::int64_t N, int L) {
    TextReader in(path);
    SupportSequence s;
    s.N = N;
    s.L = L;
    std::string tok;
    while (in.next_token(tok)) {
        char* end = nullptr;
        errno = 0;
        const long long v = std::strtoll(tok.c_str(), &end, 10);
        if (errno != 0 || end != tok.c_str() + tok.size()) in.fail("'" + tok + "' is not an integer");
        s.starts.push_back(v);
    }
    s.validate(L);
    return s;
}

void write_psf(const std::string& path, const PairSeparationFunction& xi) {
    std::string buf;
    for (int g = 0; g <= xi.max_gap(); ++g) {
        if (xi.mass[g] == 0.0) continue;
        buf += std::to_string(g);
        buf += ' ';
        buf += format_double(xi.mass[g]);
        buf += '\n';
    }
    write_file(path, buf);
}

PairSeparationFunction read_psf(const std::string& path, int L) {
    TextReader in(path);
    std::vector<std::pair<int, double>> entries;
    int max_gap = 0;
    std::string tok;
    while (true) {
        if (!in.next_token(tok)) break;
        char* end = nullptr;
        errno = 0;
        const long long g = std::strtoll(tok.c_str(), &end, 10);
        if (errno != 0 || end != tok.c_str() + tok.size()) in.fail("'" + tok + "' is not an integer gap");
        const double m = in.expect_double();
        entries.emplace_back(static_cast<int>(g), m);
        max_gap = std::max(max_gap, static_cast<int>(g));
    }
    if (entries.empty()) throw DataError("'" + path + "': empty pair separation file");
    PairSeparationFunction xi;
    xi.L = L;
    xi.mass = Eigen::VectorXd::Zero(max_gap + 1);
    for (const auto& [g, m] : entries) xi.mass[g] += m;
    xi.validate();
    return xi;
}

void write_stats(const std::string& path, const MomentStats& s) {
    s.validate();
    std::string buf;
    buf += "N " + std::to_string(s.N) + "\n";
    buf += "L " + std::to_string(s.L) + "\n";
    buf += "sigma " + format_double(s.sigma) + "\n";
    buf += "a1 " + format_double(s.a1) + "\n";
    buf += "a2";
    for (int l = 0; l < s.L; ++l) buf += " " + format_double(s.a2[l]);
    buf += "\na3";
    for (int i = 0; i < s.a3.size(); ++i) buf += " " + format_double(s.a3[i]);
    buf += "\n";
    write_file(path, buf);
}

MomentStats read_stats(const std::string& path) {
    TextReader in(path);
    MomentStats s;
    std::string key;
    auto expect_key = [&](const char* want) {
        if (!in.next_token(key) || key != want) in.fail(std::string("expected key '") + want + "'");
    };
    expect_key("N");
    s.N = in.expect_int();
    expect_key("L");
    s.L = static_cast<int>(in.expect_int());
    if (s.L <= 0) in.fail("L must be positive");
    expect_key("sigma");
    s.sigma = in.expect_double();
    expect_key("a1");
    s.a1 = in.expect_double();
    expect_key("a2");
    s.a2.resize(s.L);
    for (int l = 0; l < s.L; ++l) s.a2[l] = in.expect_double();
    expect_key("a3");
    s.a3.resize(tri_count(s.L));
    for (int i = 0; i < s.a3.size(); ++i) s.a3[i] = in.expect_double();
    const double s2 = s.sigma * s.sigma;
    if (s.N > 0)
        s.noise_floor = {std::sqrt(s2 / s.N), std::sqrt((s2 + s2 * s2) / s.N),
                         std::sqrt((s2 + s2 * s2 * s2) / s.N)};
    s.validate();
    return s;
}

void write_report(const std::string& path, const EstimateReport& rep,
                  const std::vector<std::pair<std::string, std::string>>& extras, bool include_timing) {
    std::string buf;
    buf += "method " + rep.method + "\n";
    buf += "mode " + std::string(mode_name(rep.mode)) + "\n";
    buf += "L " + std::to_string(rep.x_hat.length()) + "\n";
    buf += "seed " + std::to_string(rep.seed) + "\n";
    buf += "chosen_restart " + std::to_string(rep.chosen_restart) + "\n";
    buf += "rho0_hat " + format_double(rep.rho0_hat) + "\n";
    if (rep.rho1_hat.size() > 0) {
        buf += "rho1_hat";
        for (int i = 0; i < rep.rho1_hat.size(); ++i) buf += " " + format_double(rep.rho1_hat[i]);
        buf += "\n";
    }
    if (std::isfinite(rep.final_cost)) buf += "final_cost " + format_double(rep.final_cost) + "\n";
    if (std::isfinite(rep.log_likelihood))
        buf += "log_likelihood " + format_double(rep.log_likelihood) + "\n";
    if (!rep.stage_costs.empty()) {
        buf += "stage_costs";
        for (const double v : rep.stage_costs) buf += " " + format_double(v);
        buf += "\n";
    }
    if (!rep.stage_iterations.empty()) {
        buf += "stage_iterations";
        for (const int v : rep.stage_iterations) buf += " " + std::to_string(v);
        buf += "\n";
    }
    if (rep.em_alpha.size() > 0) {
        buf += "em_alpha";
        for (int i = 0; i < rep.em_alpha.size(); ++i) buf += " " + format_double(rep.em_alpha[i]);
        buf += "\n";
    }
    if (rep.mode == Mode::asd && rep.method == "em") {
        buf += "em_alpha0 " + format_double(rep.em_alpha0) + "\n";
        buf += "em_alpha1 " + format_double(rep.em_alpha1) + "\n";
    }
    for (const auto& [k, v] : extras) buf += k + " " + v + "\n";
    if (include_timing) buf += "wall_time_s " + format_double(rep.wall_time_s) + "\n";
    write_file(path, buf);
}

}  // namespace mtd::io
