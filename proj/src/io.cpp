#include "qssep/io.hpp"

#include "qssep/errors.hpp"

#include <boost/uuid/detail/sha1.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace qssep {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    for (int prec = 6; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

std::string results_csv(const std::vector<ResultRow>& rows) {
    std::ostringstream o;
    o << "estimator,p,sites,value,stderr,samples,N,prediction\n";
    for (const ResultRow& r : rows) {
        std::string sites;
        for (std::size_t k = 0; k < r.sites.size(); ++k) sites += (k ? ";" : "") + std::to_string(r.sites[k]);
        o << r.estimator << ',' << r.p << ',' << sites << ',' << format_double(r.estimate.value) << ','
          << format_double(r.estimate.std_error) << ',' << r.estimate.samples << ',' << r.N << ','
          << format_double(r.prediction) << '\n';
    }
    return o.str();
}

std::string snapshots_csv(const std::vector<Trajectory>& trajectories) {
    std::ostringstream o;
    o << "trajectory_id,t,i,j,re,im\n";
    for (std::size_t tr = 0; tr < trajectories.size(); ++tr) {
        const Trajectory& T = trajectories[tr];
        for (std::size_t k = 0; k < T.snapshots.size(); ++k) {
            const CMatrix& G = T.snapshots[k];
            const std::string t = format_double(T.times[k]);
            for (Eigen::Index i = 0; i < G.rows(); ++i)
                for (Eigen::Index j = 0; j < G.cols(); ++j)
                    o << tr << ',' << t << ',' << i + 1 << ',' << j + 1 << ',' << format_double(G(i, j).real()) << ','
                      << format_double(G(i, j).imag()) << '\n';
        }
    }
    return o.str();
}

std::string histogram_csv(const Histogram& h) {
    std::ostringstream o;
    o << "bin_left,bin_right,mass\n";
    for (int k = 0; k < static_cast<int>(h.mass.size()); ++k)
        o << format_double(h.bin_left(k)) << ',' << format_double(h.bin_right(k)) << ',' << format_double(h.mass[k])
          << '\n';
    return o.str();
}

std::string events_csv(const SsepTrajectory& tr) {
    std::ostringstream o;
    o << "t,site,occupancy\n";
    for (int i = 0; i < static_cast<int>(tr.initial.size()); ++i) o << "0," << i + 1 << ',' << tr.initial[i] << '\n';
    for (const SsepEvent& e : tr.events) o << format_double(e.t) << ',' << e.site << ',' << e.occupancy << '\n';
    return o.str();
}

std::string profile_csv(const GridFunction& a, const GridFunction& b) {
    require(a.size() == b.size(), "profiles differ in size");
    std::ostringstream o;
    o << "x,a,b\n";
    for (int m = 0; m < a.size(); ++m)
        o << format_double(a.x(m)) << ',' << format_double(a[m]) << ',' << format_double(b[m]) << '\n';
    return o.str();
}

std::string table_csv(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows) {
    std::ostringstream o;
    for (std::size_t k = 0; k < header.size(); ++k) o << (k ? "," : "") << header[k];
    o << '\n';
    for (const auto& r : rows) {
        require(r.size() == header.size(), "row length differs from header");
        for (std::size_t k = 0; k < r.size(); ++k) o << (k ? "," : "") << format_double(r[k]);
        o << '\n';
    }
    return o.str();
}

SvgPlot::SvgPlot(std::string title, std::string xlabel, std::string ylabel)
    : title_(std::move(title)), xlabel_(std::move(xlabel)), ylabel_(std::move(ylabel)) {}

void SvgPlot::add_bars(const std::vector<double>& left, const std::vector<double>& right,
                       const std::vector<double>& height, const std::string& color) {
    require(left.size() == right.size() && left.size() == height.size(), "bar arrays differ in length");
    bars_.push_back({left, right, height, color});
}

void SvgPlot::add_line(const std::vector<double>& x, const std::vector<double>& y, const std::string& color) {
    require(x.size() == y.size(), "line arrays differ in length");
    lines_.push_back({x, y, color});
}

namespace {

std::string escape(const std::string& s) {
    std::string o;
    for (char c : s) {
        if (c == '<') o += "&lt;";
        else if (c == '>') o += "&gt;";
        else if (c == '&') o += "&amp;";
        else o += c;
    }
    return o;
}

std::string fix(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

} // namespace

std::string SvgPlot::render(int width, int height) const {
    double x0 = INFINITY, x1 = -INFINITY, y1 = 0.0;
    for (const Bars& b : bars_)
        for (std::size_t k = 0; k < b.left.size(); ++k) {
            x0 = std::min(x0, b.left[k]);
            x1 = std::max(x1, b.right[k]);
            y1 = std::max(y1, b.height[k]);
        }
    for (const Line& l : lines_)
        for (std::size_t k = 0; k < l.x.size(); ++k) {
            if (!std::isfinite(l.x[k]) || !std::isfinite(l.y[k])) continue;
            x0 = std::min(x0, l.x[k]);
            x1 = std::max(x1, l.x[k]);
            y1 = std::max(y1, l.y[k]);
        }
    if (!(x1 > x0)) {
        x0 = 0.0;
        x1 = 1.0;
    }
    if (!(y1 > 0)) y1 = 1.0;
    y1 *= 1.1;
    const double ml = 60, mr = 20, mt = 40, mb = 50;
    const double pw = width - ml - mr, ph = height - mt - mb;
    auto X = [&](double x) { return ml + (x - x0) / (x1 - x0) * pw; };
    auto Y = [&](double y) { return mt + ph - y / y1 * ph; };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title_)
      << "</text>\n";
    for (const Bars& b : bars_)
        for (std::size_t k = 0; k < b.left.size(); ++k)
            o << "<rect x=\"" << fix(X(b.left[k])) << "\" y=\"" << fix(Y(b.height[k])) << "\" width=\""
              << fix(X(b.right[k]) - X(b.left[k])) << "\" height=\"" << fix(Y(0) - Y(b.height[k])) << "\" fill=\""
              << b.color << "\" stroke=\"white\" stroke-width=\"0.5\"/>\n";
    for (const Line& l : lines_) {
        o << "<polyline fill=\"none\" stroke=\"" << l.color << "\" stroke-width=\"2\" points=\"";
        for (std::size_t k = 0; k < l.x.size(); ++k)
            if (std::isfinite(l.x[k]) && std::isfinite(l.y[k])) o << fix(X(l.x[k])) << ',' << fix(Y(l.y[k])) << ' ';
        o << "\"/>\n";
    }
    // axes and ticks
    o << "<line x1=\"" << ml << "\" y1=\"" << fix(Y(0)) << "\" x2=\"" << ml + pw << "\" y2=\"" << fix(Y(0))
      << "\" stroke=\"black\"/>\n";
    o << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
      << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double xv = x0 + (x1 - x0) * k / 4, yv = y1 * k / 4;
        o << "<text x=\"" << fix(X(xv)) << "\" y=\"" << fix(mt + ph + 16) << "\" text-anchor=\"middle\">"
          << format_double(std::round(xv * 1000) / 1000) << "</text>\n";
        o << "<text x=\"" << fix(ml - 6) << "\" y=\"" << fix(Y(yv) + 4) << "\" text-anchor=\"end\">"
          << format_double(std::round(yv * 1000) / 1000) << "</text>\n";
    }
    o << "<text x=\"" << fix(ml + pw / 2) << "\" y=\"" << height - 10 << "\" text-anchor=\"middle\">"
      << escape(xlabel_) << "</text>\n";
    o << "<text x=\"14\" y=\"" << fix(mt + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
      << fix(mt + ph / 2) << ")\">" << escape(ylabel_) << "</text>\n";
    o << "</svg>\n";
    return o.str();
}

std::string sha1_hex(const std::string& bytes) {
    boost::uuids::detail::sha1 h;
    h.process_bytes(bytes.data(), bytes.size());
    unsigned int d[5];
    h.get_digest(d);
    char buf[41];
    for (int k = 0; k < 5; ++k) std::snprintf(buf + 8 * k, 9, "%08x", d[k]);
    return std::string(buf, 40);
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw InvalidArgument("cannot read " + p.string());
    std::ostringstream o;
    o << in.rdbuf();
    return o.str();
}

ArtifactDir::ArtifactDir(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec || !std::filesystem::is_directory(dir_))
        throw InvalidArgument("output directory " + dir_.string() + " is not writable");
}

void ArtifactDir::write(const std::string& name, const std::string& content) {
    std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
    out << content;
    out.close();
    if (!out) throw InvalidArgument("failed to write " + (dir_ / name).string());
    files_.emplace_back(name, sha1_hex(content));
    sizes_.push_back(content.size());
}

void ArtifactDir::write_json(const std::string& name, const Json& j) { write(name, j.dump(2) + "\n"); }

void ArtifactDir::write_manifest(const Json& command) const {
    std::vector<std::size_t> order(files_.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return files_[a].first < files_[b].first; });
    Json m;
    m["command"] = command;
    m["files"] = Json::array();
    for (std::size_t k : order)
        m["files"].push_back({{"name", files_[k].first}, {"bytes", sizes_[k]}, {"sha1", files_[k].second}});
    std::ofstream out(dir_ / "manifest.json", std::ios::binary | std::ios::trunc);
    out << m.dump(2) << "\n";
    if (!out) throw InvalidArgument("failed to write manifest");
}

} // namespace qssep
