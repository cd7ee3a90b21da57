#pragma once

#include "qssep/classical_ssep.hpp"
#include "qssep/ensemble_stats.hpp"
#include "qssep/gmatrix_sde.hpp"
#include "qssep/haar_rmt.hpp"
#include "qssep/variational.hpp"

#include "json.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace qssep {

using Json = nlohmann::ordered_json;

/// Shortest text that reads back to the same double ("%.17g" trimmed).
std::string format_double(double v);

// CSV bodies, LF line ends, fixed column order.
std::string results_csv(const std::vector<ResultRow>& rows); // estimator,p,sites,value,stderr,samples,N,prediction
std::string snapshots_csv(const std::vector<Trajectory>& trajectories); // trajectory_id,t,i,j,re,im
std::string histogram_csv(const Histogram& h);                     // bin_left,bin_right,mass
std::string events_csv(const SsepTrajectory& tr);                  // t,site,occupancy
std::string profile_csv(const GridFunction& a, const GridFunction& b); // x,a,b
std::string table_csv(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows);

/// Minimal line/bar chart.
class SvgPlot {
public:
    SvgPlot(std::string title, std::string xlabel, std::string ylabel);
    void add_bars(const std::vector<double>& left, const std::vector<double>& right, const std::vector<double>& height,
                  const std::string& color = "#9ecae1");
    void add_line(const std::vector<double>& x, const std::vector<double>& y, const std::string& color = "#d62728");
    std::string render(int width = 640, int height = 420) const;

private:
    struct Bars {
        std::vector<double> left, right, height;
        std::string color;
    };
    struct Line {
        std::vector<double> x, y;
        std::string color;
    };
    std::string title_, xlabel_, ylabel_;
    std::vector<Bars> bars_;
    std::vector<Line> lines_;
};

/// Hex SHA-1 of a byte string.
std::string sha1_hex(const std::string& bytes);

/// Output directory that remembers every file it writes; write_manifest()
/// lists them (sorted by name) with their digests.
class ArtifactDir {
public:
    explicit ArtifactDir(std::filesystem::path dir);
    const std::filesystem::path& path() const { return dir_; }
    void write(const std::string& name, const std::string& content);
    void write_json(const std::string& name, const Json& j);
    /// Writes manifest.json with {"command", "files": [{"name", "bytes", "sha1"}]}.
    void write_manifest(const Json& command) const;

private:
    std::filesystem::path dir_;
    std::vector<std::pair<std::string, std::string>> files_; // name, digest
    std::vector<std::size_t> sizes_;
};

std::string read_file(const std::filesystem::path& p);

} // namespace qssep
