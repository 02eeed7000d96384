#include "fds/render.hpp"
#include "fds/ssim.hpp"

namespace fds {

LossValue image_loss(const RasterImage& rendered, const RasterImage& gt, const LossConfig& cfg,
                     RasterImage* grad) {
  if (rendered.width() != gt.width() || rendered.height() != gt.height()) {
    throw InvalidParameter("image_loss: rendered and ground-truth dimensions differ");
  }
  const double lambda = cfg.ssim_lambda;
  const auto r = rendered.data();
  const auto g = gt.data();
  const double norm = 1.0 / (255.0 * static_cast<double>(r.size()));

  LossValue out;
  if (lambda != 0.0) {
    out.ssim = ssim_with_grad(rendered, gt, grad);
    if (grad != nullptr) {
      for (double& v : grad->data()) v *= -lambda;
    }
  } else {
    out.ssim = ssim(rendered, gt);
    if (grad != nullptr) *grad = RasterImage(rendered.width(), rendered.height());
  }

  double l1 = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double d = r[i] - g[i];
    l1 += std::abs(d);
    if (grad != nullptr && d != 0.0) {
      grad->data()[i] += (1.0 - lambda) * norm * (d > 0.0 ? 1.0 : -1.0);
    }
  }
  out.l1 = l1 * norm;
  out.loss = (1.0 - lambda) * out.l1 + lambda * (1.0 - out.ssim);
  return out;
}

}  // namespace fds
