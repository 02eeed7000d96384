#include "fds/gaussian.hpp"

#include <Eigen/LU>

#include <sstream>

namespace fds {

Gaussian1D::Gaussian1D(double mean, double stddev, Vec3 c)
    : color(std::move(c)), mean_(mean), stddev_(stddev) {
  if (!(stddev > 0.0)) {
    throw InvalidParameter("Gaussian1D: stddev must be positive");
  }
}

double Gaussian1D::value_at(double x) const {
  const double d = (x - mean_) / stddev_;
  return std::exp(-0.5 * d * d);
}

Mat2 rotation_matrix(double rot) {
  const double c = std::cos(rot);
  const double s = std::sin(rot);
  Mat2 r;
  r << c, -s, s, c;
  return r;
}

Mat2 build_covariance(double rot, const Vec2& s) {
  if (!(s.x() > 0.0) || !(s.y() > 0.0)) {
    std::ostringstream os;
    os << "build_covariance: scale components must be positive, got (" << s.x() << ", " << s.y()
       << ")";
    throw InvalidParameter(os.str());
  }
  const Mat2 r = rotation_matrix(rot);
  const Mat2 rs = r * s.asDiagonal();
  Mat2 sigma = rs * rs.transpose();
  // Exact symmetry; the two off-diagonal products can differ in the last ulp.
  const double off = 0.5 * (sigma(0, 1) + sigma(1, 0));
  sigma(0, 1) = off;
  sigma(1, 0) = off;
  return sigma;
}

Mat2 covariance_of(const Gaussian2D& g) { return build_covariance(g.rot, g.scale()); }

double eval_gaussian(const Vec2& mu, const Mat2& sigma, const Vec2& x) {
  const double det = sigma.determinant();
  const double scale = sigma.cwiseAbs().maxCoeff();
  if (!(std::abs(det) > 1e-300) || !(std::abs(det) > 1e-14 * scale * scale)) {
    std::ostringstream os;
    os << "eval_gaussian: singular covariance (det=" << det << ", max|entry|=" << scale << ")";
    throw NumericalError(os.str());
  }
  const Vec2 d = x - mu;
  // Closed-form 2x2 inverse quadratic form.
  const double q = (sigma(1, 1) * d.x() * d.x() - (sigma(0, 1) + sigma(1, 0)) * d.x() * d.y() +
                    sigma(0, 0) * d.y() * d.y()) /
                   det;
  return std::exp(-0.5 * q);
}

double eval_gaussian(const Gaussian2D& g, const Vec2& x) {
  return eval_gaussian(g.mu, covariance_of(g), x);
}

double eval_gaussian(const Projected2D& p, const Vec2& x) {
  return eval_gaussian(p.mu_p, p.sigma_p, x);
}

namespace {

void require_invertible(const Mat2& a) {
  const double det = a.determinant();
  if (!(std::abs(det) > 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff()))) {
    std::ostringstream os;
    os << "invalid view: linear map is singular (det=" << det << ")";
    throw InvalidParameter(os.str());
  }
}

}  // namespace

Projected2D project(const Projected2D& p, const AffineView& view) {
  require_invertible(view.linear);
  Projected2D out;
  out.mu_p = view.linear * p.mu_p + view.translation;
  out.sigma_p = view.linear * p.sigma_p * view.linear.transpose();
  const double off = 0.5 * (out.sigma_p(0, 1) + out.sigma_p(1, 0));
  out.sigma_p(0, 1) = off;
  out.sigma_p(1, 0) = off;
  return out;
}

Projected2D project(const Gaussian2D& g, const AffineView& view) {
  return project(Projected2D{g.mu, covariance_of(g)}, view);
}

AffineView compose(const AffineView& a, const AffineView& b) {
  return {a.linear * b.linear, a.linear * b.translation + a.translation};
}

AffineView inverse(const AffineView& v) {
  require_invertible(v.linear);
  const Mat2 inv = v.linear.inverse();
  return {inv, -inv * v.translation};
}

}  // namespace fds
