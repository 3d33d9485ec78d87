#include "riskbid/ctr_distribution.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "riskbid/math_util.hpp"
#include "riskbid/parallel.hpp"
#include "riskbid/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "table files are little-endian; add byte swapping for this host");

namespace riskbid {

double ctr_pdf(const CtrPosterior& p, double yhat) {
  if (!(yhat > 0.0) || !(yhat < 1.0)) {
    throw InvalidInput("ctr_pdf: yhat must lie in (0, 1)");
  }
  const double t = logit(yhat) - p.m;
  const double norm = (yhat - yhat * yhat) * std::sqrt(2.0 * kPi * p.s2);
  return std::exp(-t * t / (2.0 * p.s2)) / norm;
}

namespace {

// Integration window on the logit scale; the normal tail beyond 12 sigma
// carries ~1e-33 mass.
constexpr double kTailSigmas = 12.0;

}  // namespace

CtrMoments moments_quadrature(const CtrPosterior& p, int panels) {
  if (panels < 100) {
    throw InvalidInput("moments_quadrature: panels must be >= 100");
  }
  const double s = std::sqrt(p.s2);
  const double lo = p.m - kTailSigmas * s;
  const double hi = p.m + kTailSigmas * s;
  const double e1 = simpson(
      [&](double u) { return sigmoid(u) * normal_pdf(u, p.m, s); }, lo, hi, panels);
  const double e2 = simpson(
      [&](double u) {
        const double y = sigmoid(u);
        return y * y * normal_pdf(u, p.m, s);
      },
      lo, hi, panels);
  CtrMoments out;
  out.mean = e1;
  out.stddev = std::sqrt(std::max(0.0, e2 - e1 * e1));
  return out;
}

CtrMoments moments_mc(const CtrPosterior& p, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw InvalidInput("moments_mc: n must be >= 1");
  Rng rng(seed);
  const double s = std::sqrt(p.s2);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = sigmoid(rng.normal(p.m, s));
    sum += y;
    sum_sq += y * y;
  }
  CtrMoments out;
  out.mean = sum / static_cast<double>(n);
  const double e2 = sum_sq / static_cast<double>(n);
  out.stddev = std::sqrt(std::max(0.0, e2 - out.mean * out.mean));
  return out;
}

double ctr_pdf_mass(const CtrPosterior& p, int panels) {
  // Substituting y = sigmoid(u) turns the (0,1) integral into
  // integral of ctr_pdf(sigmoid(u)) * sigmoid'(u) du, which keeps the
  // boundary spikes of extreme (m, s2) integrable on a uniform grid.
  const double s = std::sqrt(p.s2);
  const double lo = p.m - kTailSigmas * s;
  const double hi = p.m + kTailSigmas * s;
  return simpson(
      [&](double u) {
        const double y = sigmoid(u);
        if (!(y > 0.0) || !(y < 1.0)) return 0.0;
        return ctr_pdf(p, y) * y * (1.0 - y);
      },
      lo, hi, panels);
}

std::string to_string(MomentMethod method) {
  return method == MomentMethod::kQuadrature ? "quadrature" : "mc";
}

MomentMethod moment_method_from_string(const std::string& name) {
  if (name == "quadrature") return MomentMethod::kQuadrature;
  if (name == "mc") return MomentMethod::kMonteCarlo;
  throw InvalidInput("unknown moment method: " + name);
}

void GridSpec::validate(const char* what) const {
  if (!(min < max) || bins < 1 || !std::isfinite(min) || !std::isfinite(max)) {
    throw InvalidInput(std::string(what) + ": grid requires min < max and bins >= 1");
  }
}

std::uint32_t GridSpec::index_for(double x) const {
  if (!(x > min)) return 0;
  if (!(x < max)) return bins - 1;
  const auto i = static_cast<std::uint32_t>((x - min) / (max - min) * bins);
  return i >= bins ? bins - 1 : i;
}

MomentTable MomentTable::build(const GridSpec& m_grid, const GridSpec& s2_grid,
                               std::uint32_t samples_per_cell, std::uint64_t seed,
                               MomentMethod method, unsigned threads) {
  m_grid.validate("m_grid");
  s2_grid.validate("s2_grid");
  if (!(s2_grid.min > 0.0)) {
    throw InvalidInput("s2 grid lower bound must be > 0");
  }
  if (samples_per_cell < 1) {
    throw InvalidInput("samples_per_cell must be >= 1");
  }

  MomentTable t;
  t.m_grid_ = m_grid;
  t.s2_grid_ = s2_grid;
  t.samples_per_cell_ = samples_per_cell;
  t.seed_ = seed;
  t.method_ = method;

  const std::size_t n_cells =
      static_cast<std::size_t>(m_grid.bins) * s2_grid.bins;
  t.cells_.assign(n_cells * 2, 0.0);

  const int panels =
      static_cast<int>(std::min(10'000'000u, std::max(100u, samples_per_cell)));
  parallel_for(n_cells, threads, [&](std::size_t cell) {
    const std::uint32_t mi = static_cast<std::uint32_t>(cell / s2_grid.bins);
    const std::uint32_t si = static_cast<std::uint32_t>(cell % s2_grid.bins);
    const CtrPosterior p(m_grid.center(mi), s2_grid.center(si));
    const CtrMoments moments =
        method == MomentMethod::kQuadrature
            ? moments_quadrature(p, panels)
            : moments_mc(p, samples_per_cell, derive_seed(seed, cell));
    t.cells_[cell * 2] = moments.mean;
    t.cells_[cell * 2 + 1] = moments.stddev;
  });
  return t;
}

CtrMoments MomentTable::lookup(double m, double s2) const {
  return cell(m_grid_.index_for(m), s2_grid_.index_for(s2));
}

CtrMoments MomentTable::cell(std::uint32_t mi, std::uint32_t si) const {
  const std::size_t idx =
      (static_cast<std::size_t>(mi) * s2_grid_.bins + si) * 2;
  CtrMoments out;
  out.mean = cells_[idx];
  out.stddev = cells_[idx + 1];
  return out;
}

namespace {

constexpr char kMomentMagic[] = "RBMT1";

void write_doubles_le(std::ofstream& out, const std::vector<double>& values) {
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
}

}  // namespace

void MomentTable::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << kMomentMagic << "\n";
  std::ostringstream header;
  header.precision(17);
  header << m_grid_.min << " " << m_grid_.max << " " << m_grid_.bins << " "
         << s2_grid_.min << " " << s2_grid_.max << " " << s2_grid_.bins << " "
         << samples_per_cell_ << " " << seed_ << " " << to_string(method_);
  out << header.str() << "\n";
  write_doubles_le(out, cells_);
  if (!out) throw IoError("write failed: " + path.string());
}

MomentTable MomentTable::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  std::string magic;
  std::getline(in, magic);
  if (magic != kMomentMagic) {
    throw ParseError(path.string(), 1, "bad magic, expected RBMT1");
  }
  std::string header;
  std::getline(in, header);
  std::istringstream fields(header);
  MomentTable t;
  std::string method;
  fields >> t.m_grid_.min >> t.m_grid_.max >> t.m_grid_.bins >>
      t.s2_grid_.min >> t.s2_grid_.max >> t.s2_grid_.bins >>
      t.samples_per_cell_ >> t.seed_ >> method;
  if (!fields) throw ParseError(path.string(), 2, "bad table header");
  t.method_ = moment_method_from_string(method);
  t.m_grid_.validate("m_grid");
  t.s2_grid_.validate("s2_grid");

  const std::size_t n_cells =
      static_cast<std::size_t>(t.m_grid_.bins) * t.s2_grid_.bins;
  t.cells_.resize(n_cells * 2);
  in.read(reinterpret_cast<char*>(t.cells_.data()),
          static_cast<std::streamsize>(t.cells_.size() * sizeof(double)));
  if (in.gcount() !=
      static_cast<std::streamsize>(t.cells_.size() * sizeof(double))) {
    throw ParseError(path.string(), 3, "truncated cell payload");
  }
  return t;
}

}  // namespace riskbid
