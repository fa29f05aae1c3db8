#include "spls/datagen.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "spls/linalg.hpp"

namespace spls {

LatentSpec default_latent_spec() {
  LatentSpec spec;
  spec.sigma_xx.resize(3, 3);
  spec.sigma_xx << 6, 2, 1,
                   2, 6, 2,
                   1, 2, 6;
  spec.sigma_yy = spec.sigma_xx;
  spec.sigma_xy.resize(3);
  spec.sigma_xy << 4, 2, 0.5;
  return spec;
}

LatentMoments isserlis_moments(const Mat& sxx, const Vec& sxy, const Mat& syy) {
  const Eigen::Index d = sxy.size();
  LatentMoments mom;
  mom.gamma = sxx.diagonal().head(d);
  mom.omega = syy.diagonal().head(d);
  mom.alpha.resize(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      double a = sxy(i) * sxy(j) + sxx(i, j) * syy(i, j);
      if (i == j) a += sxy(i) * sxy(i);
      mom.alpha(i, j) = a;
    }
  }
  return mom;
}

Mat psd_cholesky(const Mat& cov, double tol, Mat* repaired) {
  const Mat sym = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> eig(sym);
  if (eig.info() != Eigen::Success) throw NumericalFailure("psd_cholesky: eigensolver failed");
  const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
  const double min_eig = eig.eigenvalues().minCoeff();
  if (min_eig < -tol * scale) {
    std::ostringstream msg;
    msg << "joint covariance is indefinite (smallest eigenvalue " << min_eig << ")";
    throw InvalidInput(msg.str());
  }
  Mat fixed = sym;
  if (min_eig < 0.0) {
    const Vec clipped = eig.eigenvalues().cwiseMax(0.0);
    fixed = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
    fixed = 0.5 * (fixed + fixed.transpose());
  }
  Eigen::LLT<Mat> llt(fixed);
  double jitter = 1e-12 * scale;
  for (int attempt = 0; llt.info() != Eigen::Success && attempt < 8; ++attempt) {
    llt.compute(fixed + jitter * Mat::Identity(fixed.rows(), fixed.cols()));
    jitter *= 10.0;
  }
  if (llt.info() != Eigen::Success) throw NumericalFailure("psd_cholesky: factorization failed");
  if (repaired) *repaired = fixed;
  return llt.matrixL();
}

namespace {

Mat padded_cross(const Vec& sxy, std::size_t m) {
  const auto d = sxy.size();
  Mat out = Mat::Zero(static_cast<Eigen::Index>(m), d);
  for (Eigen::Index i = 0; i < d; ++i) out(i, i) = sxy(i);
  return out;
}

void check_latent(const Mat& sxx, const Vec& sxy, const Mat& syy) {
  const auto d = sxy.size();
  if (syy.rows() != d || syy.cols() != d) throw InvalidInput("sigma_latent_yy must be d×d");
  if (sxx.rows() != sxx.cols() || sxx.rows() < d) {
    throw InvalidInput("sigma_latent_xx must be m×m with m ≥ d");
  }
  if (!sxx.isApprox(sxx.transpose(), 1e-12) || !syy.isApprox(syy.transpose(), 1e-12)) {
    throw InvalidInput("latent covariance blocks must be symmetric");
  }
  for (Eigen::Index i = 0; i < d; ++i) {
    if (sxy(i) < 0.0) throw InvalidInput("sigma_latent_xy must be nonnegative");
    if (i > 0 && sxy(i) > sxy(i - 1)) {
      throw InvalidInput("sigma_latent_xy must be nonincreasing");
    }
  }
}

}  // namespace

CovarianceModel build_model_with_mixing(const Mat& sxx, const Vec& sxy, const Mat& syy,
                                        const Mat& mix_u, const Mat& mix_v) {
  check_latent(sxx, sxy, syy);
  const auto m = static_cast<std::size_t>(sxx.rows());
  const auto d = static_cast<std::size_t>(sxy.size());
  const auto mi = static_cast<Eigen::Index>(m);
  const auto di = static_cast<Eigen::Index>(d);
  if (mix_u.rows() != mi || mix_u.cols() != mi || mix_v.rows() != di || mix_v.cols() != di) {
    throw InvalidInput("mixing matrices have wrong shape");
  }

  CovarianceModel model;
  model.m = m;
  model.d = d;
  model.sigma_latent_xx = sxx;
  model.sigma_latent_yy = syy;
  model.sigma_latent_xy = sxy;
  model.mix_u = mix_u;
  model.mix_v = mix_v;

  const Mat cross = padded_cross(sxy, m);
  model.sigma_xy = mix_u.transpose() * cross * mix_v;

  Mat joint(mi + di, mi + di);
  joint.topLeftCorner(mi, mi) = mix_u.transpose() * sxx * mix_u;
  joint.topRightCorner(mi, di) = model.sigma_xy;
  joint.bottomLeftCorner(di, mi) = model.sigma_xy.transpose();
  joint.bottomRightCorner(di, di) = mix_v.transpose() * syy * mix_v;
  model.chol = psd_cholesky(joint, 1e-8, &model.joint_cov);

  Mat latent(mi + di, mi + di);
  latent.topLeftCorner(mi, mi) = sxx;
  latent.topRightCorner(mi, di) = cross;
  latent.bottomLeftCorner(di, mi) = cross.transpose();
  latent.bottomRightCorner(di, di) = syy;
  model.latent_chol = psd_cholesky(latent);

  model.moments = isserlis_moments(sxx, sxy, syy);
  return model;
}

CovarianceModel build_model(const Mat& sxx, const Vec& sxy, const Mat& syy, std::size_t m,
                            std::size_t d, std::uint64_t seed) {
  if (d > m) throw InvalidInput("build_model requires d ≤ m");
  if (static_cast<std::size_t>(sxx.rows()) != m || static_cast<std::size_t>(sxy.size()) != d) {
    throw InvalidInput("latent block sizes do not match (m, d)");
  }
  Rng rng(seed);
  std::normal_distribution<double> normal;
  const auto mi = static_cast<Eigen::Index>(m);
  const auto di = static_cast<Eigen::Index>(d);
  Mat u_raw(mi, mi);
  Mat v_raw(di, di);
  for (Eigen::Index j = 0; j < mi; ++j)
    for (Eigen::Index i = 0; i < mi; ++i) u_raw(i, j) = normal(rng);
  for (Eigen::Index j = 0; j < di; ++j)
    for (Eigen::Index i = 0; i < di; ++i) v_raw(i, j) = normal(rng);
  CovarianceModel model = build_model_with_mixing(sxx, sxy, syy, linalg::gram_schmidt(u_raw),
                                                  linalg::gram_schmidt(v_raw));
  model.seed = seed;
  return model;
}

void sample_into(const CovarianceModel& model, Rng& rng, TwoViewSample& out) {
  thread_local std::normal_distribution<double> normal;
  thread_local Vec xi;
  thread_local Vec z;
  const auto n = static_cast<Eigen::Index>(model.m + model.d);
  xi.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) xi(i) = normal(rng);
  // the distribution may cache a second variate; reset so that a stream
  // depends only on its own generator
  normal.reset();
  z.noalias() = model.chol.triangularView<Eigen::Lower>() * xi;
  out.x = z.head(static_cast<Eigen::Index>(model.m));
  out.y = z.tail(static_cast<Eigen::Index>(model.d));
  out.mask_x.reset();
  out.mask_y.reset();
}

TwoViewSample sample(const CovarianceModel& model, Rng& rng) {
  TwoViewSample s;
  sample_into(model, rng, s);
  return s;
}

void mask_in_place(TwoViewSample& s, double p, Rng& rng) {
  if (!(p > 0.0 && p <= 1.0)) throw InvalidInput("observe probability must lie in (0,1]");
  std::bernoulli_distribution keep(p);
  auto apply = [&](Vec& v, std::optional<std::vector<bool>>& mask) {
    std::vector<bool> mk(static_cast<std::size_t>(v.size()), true);
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const bool observed = p >= 1.0 ? true : keep(rng);
      mk[static_cast<std::size_t>(i)] = observed;
      if (!observed) v(i) = 0.0;
    }
    mask = std::move(mk);
  };
  apply(s.x, s.mask_x);
  apply(s.y, s.mask_y);
}

TwoViewSample mask(const TwoViewSample& s, double p, Rng& rng) {
  TwoViewSample out = s;
  mask_in_place(out, p, rng);
  return out;
}

bool ReplaySource::next(TwoViewSample& out) {
  if (pos_ >= samples_->size()) return false;
  out = (*samples_)[pos_++];
  return true;
}

std::size_t ReplaySource::dim_x() const {
  return samples_->empty() ? 0 : static_cast<std::size_t>(samples_->front().x.size());
}

std::size_t ReplaySource::dim_y() const {
  return samples_->empty() ? 0 : static_cast<std::size_t>(samples_->front().y.size());
}

std::vector<Vec> read_view_csv(std::istream& in, bool header, const std::string& label) {
  std::vector<Vec> rows;
  std::string line;
  std::size_t line_no = 0;
  Eigen::Index width = -1;
  std::vector<double> cells;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (header && line_no == 1) continue;
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    cells.clear();
    std::size_t start = 0;
    std::size_t col = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      std::string_view cell(line.data() + start,
                            (comma == std::string::npos ? line.size() : comma) - start);
      ++col;
      while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
      while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t')) cell.remove_suffix(1);
      double value = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), value);
      if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size() ||
          !std::isfinite(value)) {
        throw ParseError(label + " line " + std::to_string(line_no) + " column " +
                             std::to_string(col) + ": non-numeric cell '" +
                             std::string(cell) + "'",
                         line_no);
      }
      cells.push_back(value);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    const auto n = static_cast<Eigen::Index>(cells.size());
    if (width >= 0 && n != width) {
      throw ParseError(label + " line " + std::to_string(line_no) + ": expected " +
                           std::to_string(width) + " columns, found " + std::to_string(n),
                       line_no);
    }
    width = n;
    rows.emplace_back(Eigen::Map<const Vec>(cells.data(), n));
  }
  return rows;
}

ReplaySource load_two_view_csv(const std::string& path_x, const std::string& path_y,
                               const CsvOptions& opts) {
  auto read = [&](const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path, 0);
    return read_view_csv(in, opts.header, path);
  };
  std::vector<Vec> xs = read(path_x);
  std::vector<Vec> ys = read(path_y);
  if (xs.size() != ys.size()) {
    throw ParseError("row-count mismatch: " + path_x + " has " + std::to_string(xs.size()) +
                         " rows, " + path_y + " has " + std::to_string(ys.size()),
                     0);
  }
  if (xs.empty()) throw ParseError("no data rows in " + path_x, 0);
  if (opts.center) {
    Vec mx = Vec::Zero(xs.front().size());
    Vec my = Vec::Zero(ys.front().size());
    for (const auto& x : xs) mx += x;
    for (const auto& y : ys) my += y;
    mx /= static_cast<double>(xs.size());
    my /= static_cast<double>(ys.size());
    for (auto& x : xs) x -= mx;
    for (auto& y : ys) y -= my;
  }
  auto samples = std::make_shared<std::vector<TwoViewSample>>();
  samples->reserve(xs.size());
  for (std::size_t k = 0; k < xs.size(); ++k) {
    samples->push_back(TwoViewSample{std::move(xs[k]), std::move(ys[k]), {}, {}});
  }
  return ReplaySource(std::move(samples));
}

void write_view_csv(std::ostream& out, std::span<const Vec> rows) {
  char buf[32];
  for (const auto& row : rows) {
    for (Eigen::Index i = 0; i < row.size(); ++i) {
      if (i > 0) out << ',';
      std::snprintf(buf, sizeof buf, "%.17g", row(i));
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace spls
