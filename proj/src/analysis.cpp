#include "fds/analysis.hpp"

#include "fds/density.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace fds {

namespace {

std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double mean_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = mean_rank;
    i = j + 1;
  }
  return r;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

template <int Dim>
DensityVolumeReport analyze_impl(std::span<const Eigen::Matrix<double, Dim, 1>> positions,
                                 std::span<const double> volumes, std::size_t k,
                                 std::size_t sample_cap, std::uint64_t seed) {
  if (positions.size() != volumes.size()) {
    throw InvalidParameter("analyze: positions and volumes differ in length");
  }
  if (positions.size() <= k) {
    throw InvalidParameter("analyze: cloud of " + std::to_string(positions.size()) +
                           " is too small for K=" + std::to_string(k));
  }
  const DensityField field = density_field(positions, k);
  DensityVolumeReport rep;
  rep.k_eff = field.k_eff;
  rep.population = positions.size();

  std::vector<std::size_t> chosen(positions.size());
  std::iota(chosen.begin(), chosen.end(), std::size_t{0});
  if (chosen.size() > sample_cap) {
    std::vector<std::size_t> picked;
    std::mt19937_64 rng(seed);
    std::sample(chosen.begin(), chosen.end(), std::back_inserter(picked), sample_cap, rng);
    chosen = std::move(picked);
  }
  std::vector<double> d, v;
  for (std::size_t i : chosen) {
    rep.points.push_back({i, field.density[i], volumes[i]});
    d.push_back(field.density[i]);
    v.push_back(volumes[i]);
  }
  rep.spearman = spearman(d, v);
  rep.fit = fit_power_law(d, v);
  return rep;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw InvalidParameter("spearman: need two equally long series of length >= 2");
  }
  const auto rx = ranks(x), ry = ranks(y);
  return pearson(rx, ry);
}

PowerLawFit fit_power_law(std::span<const double> density, std::span<const double> volume) {
  if (density.size() != volume.size() || density.size() < 2) {
    throw InvalidParameter("fit_power_law: need two equally long series of length >= 2");
  }
  std::vector<double> lx(density.size()), ly(volume.size());
  for (std::size_t i = 0; i < density.size(); ++i) {
    if (!(density[i] > 0.0) || !(volume[i] > 0.0)) {
      throw InvalidParameter("fit_power_law: densities and volumes must be positive");
    }
    lx[i] = std::log(density[i]);
    ly[i] = std::log(volume[i]);
  }
  const auto n = static_cast<double>(lx.size());
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  PowerLawFit fit;
  fit.exponent = sxx > 0.0 ? sxy / sxx : 0.0;
  fit.log_coeff = my - fit.exponent * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double r = ly[i] - (fit.log_coeff + fit.exponent * lx[i]);
    ss += r * r;
  }
  fit.residual_rms = std::sqrt(ss / n);
  return fit;
}

DensityVolumeReport analyze_density_volume(std::span<const Vec2> positions,
                                           std::span<const double> volumes, std::size_t k,
                                           std::size_t sample_cap, std::uint64_t seed) {
  return analyze_impl<2>(positions, volumes, k, sample_cap, seed);
}

DensityVolumeReport analyze_density_volume(std::span<const Vec3> positions,
                                           std::span<const double> volumes, std::size_t k,
                                           std::size_t sample_cap, std::uint64_t seed) {
  return analyze_impl<3>(positions, volumes, k, sample_cap, seed);
}

std::vector<double> areas_of(const GaussianCloud& cloud) {
  std::vector<double> out;
  out.reserve(cloud.size());
  for (const auto& g : cloud.gaussians()) {
    const Vec2 s = g.scale();
    out.push_back(kPi * s.x() * s.y());
  }
  return out;
}

void write_cloud_csv(const GaussianCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  out << "mu_x,mu_y,rot,s_a,s_r_raw_x,s_r_raw_y,alpha_raw,r,g,b,order_key\n";
  for (const auto& g : cloud.gaussians()) {
    out << g.mu.x() << ',' << g.mu.y() << ',' << g.rot << ',' << g.s_a << ',' << g.s_r_raw.x()
        << ',' << g.s_r_raw.y() << ',' << g.alpha_raw << ',' << g.color.x() << ','
        << g.color.y() << ',' << g.color.z() << ',' << g.order_key << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

GaussianCloud read_cloud_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  // Skip comment stamps, then the header row.
  do {
    if (!std::getline(in, line)) throw ParseError(path.string() + ": missing header");
  } while (!line.empty() && line[0] == '#');
  if (line.rfind("mu_x,", 0) != 0) throw ParseError(path.string() + ": unexpected header '" + line + "'");
  GaussianCloud cloud;
  long row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 11) {
      throw ParseError(path.string() + ": row " + std::to_string(row) + " has " +
                       std::to_string(cells.size()) + " columns, expected 11");
    }
    try {
      Gaussian2D g;
      g.mu = Vec2(std::stod(cells[0]), std::stod(cells[1]));
      g.rot = std::stod(cells[2]);
      g.s_a = std::stod(cells[3]);
      g.s_r_raw = Vec2(std::stod(cells[4]), std::stod(cells[5]));
      g.alpha_raw = std::stod(cells[6]);
      g.color = Vec3(std::stod(cells[7]), std::stod(cells[8]), std::stod(cells[9]));
      g.order_key = std::stoull(cells[10]);
      cloud.add_keep_key(g);
    } catch (const std::logic_error&) {
      throw ParseError(path.string() + ": bad number on row " + std::to_string(row));
    }
  }
  return cloud;
}

}  // namespace fds
