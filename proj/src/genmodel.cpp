#include "latmap/genmodel.hpp"

#include <algorithm>
#include <cmath>

#include "latmap/error.hpp"

namespace latmap::gm {

using sim::kMaxRange;
using sim::kNumBeams;

MapRealization MapRealization::zeros(int w, int h, int d) {
  MapRealization m;
  m.w = w;
  m.h = h;
  m.d = d;
  m.cells.assign(static_cast<size_t>(w) * h * d, 0.0);
  return m;
}

std::span<double> MapRealization::cell(int ix, int iy) {
  return {cells.data() + (static_cast<size_t>(iy) * w + ix) * d, static_cast<size_t>(d)};
}

std::span<const double> MapRealization::cell(int ix, int iy) const {
  return {cells.data() + (static_cast<size_t>(iy) * w + ix) * d, static_cast<size_t>(d)};
}

BilinearWeights attention_weights(double x, double y, int grid_w, int grid_h) {
  require(grid_w >= 2 && grid_h >= 2, ErrorCode::invalid_argument, "grid must be at least 2x2");
  require(x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0, ErrorCode::invalid_argument,
          "position outside bounds");
  BilinearWeights bw;
  double u = x * grid_w - 0.5;
  double v = y * grid_h - 0.5;
  double dudx = grid_w, dvdy = grid_h;
  if (u <= 0.0) u = 0.0, dudx = 0.0;
  if (u >= grid_w - 1) u = grid_w - 1, dudx = 0.0;
  if (v <= 0.0) v = 0.0, dvdy = 0.0;
  if (v >= grid_h - 1) v = grid_h - 1, dvdy = 0.0;
  bw.ix0 = std::min(static_cast<int>(u), grid_w - 2);
  bw.iy0 = std::min(static_cast<int>(v), grid_h - 2);
  const double fu = u - bw.ix0;
  const double fv = v - bw.iy0;
  bw.w = {(1 - fu) * (1 - fv), fu * (1 - fv), (1 - fu) * fv, fu * fv};
  bw.dwdx = {-(1 - fv) * dudx, (1 - fv) * dudx, -fv * dudx, fv * dudx};
  bw.dwdy = {-(1 - fu) * dvdy, -fu * dvdy, (1 - fu) * dvdy, fu * dvdy};
  return bw;
}

void attend_into(const MapRealization& map, double x, double y, std::span<double> chart,
                 BilinearWeights* wts) {
  require(static_cast<int>(chart.size()) == map.d, ErrorCode::invalid_argument,
          "chart size mismatch");
  const BilinearWeights bw = attention_weights(x, y, map.w, map.h);
  if (wts) *wts = bw;
  std::fill(chart.begin(), chart.end(), 0.0);
  const int ix[4] = {bw.ix0, bw.ix0 + 1, bw.ix0, bw.ix0 + 1};
  const int iy[4] = {bw.iy0, bw.iy0, bw.iy0 + 1, bw.iy0 + 1};
  for (int k = 0; k < 4; ++k) {
    const auto cell = map.cell(ix[k], iy[k]);
    for (int c = 0; c < map.d; ++c) chart[c] += bw.w[k] * cell[c];
  }
}

std::vector<double> attend(const MapRealization& map, const Pose& pose) {
  std::vector<double> chart(map.d);
  attend_into(map, pose.x, pose.y, chart);
  return chart;
}

EmissionModel make_emission_model(int d_m, const std::vector<int>& hidden, double sigma_e,
                                  Rng& rng) {
  require(sigma_e > 0.0, ErrorCode::invalid_argument, "sigma_e must be positive");
  std::vector<int> sizes{d_m};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(kNumBeams);
  EmissionModel m;
  m.net = nn::make_dense_net(sizes, nn::Activation::softsign, nn::Activation::identity, rng);
  m.sigma_e = sigma_e;
  return m;
}

namespace {

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// positive remainder of a beam index
int mod_beams(int k) {
  int m = k % kNumBeams;
  return m < 0 ? m + kNumBeams : m;
}

}  // namespace

std::array<double, kNumBeams> circular_shift(const std::array<double, kNumBeams>& canon,
                                             double shift_beams) {
  std::array<double, kNumBeams> out{};
  const double base = std::floor(shift_beams);
  const double frac = shift_beams - base;
  const int k0 = static_cast<int>(base);
  for (int i = 0; i < kNumBeams; ++i) {
    const int a = mod_beams(i + k0);
    const int b = mod_beams(i + k0 + 1);
    out[i] = (1.0 - frac) * canon[a] + frac * canon[b];
  }
  return out;
}

void emission_forward(const EmissionModel& model, std::span<const double> chart, double heading,
                      EmissionEval& eval) {
  const std::vector<double> raw = nn::forward(model.net, chart, &eval.tape);
  for (int i = 0; i < kNumBeams; ++i) {
    eval.raw[i] = raw[i];
    eval.canonical[i] = kMaxRange * logistic(raw[i]);
  }
  eval.heading = heading;
  eval.mean = circular_shift(eval.canonical, heading / sim::kBeamStep);
}

sim::LidarScan emission_mean(const EmissionModel& model, std::span<const double> chart,
                             double heading) {
  EmissionEval eval;
  emission_forward(model, chart, heading, eval);
  sim::LidarScan scan;
  scan.readings = eval.mean;
  return scan;
}

double emission_logpdf(const EmissionModel& model, const EmissionEval& eval,
                       const sim::LidarScan& obs) {
  require(model.sigma_e > 0.0, ErrorCode::invalid_state, "sigma_e must be positive");
  const double var = model.sigma_e * model.sigma_e;
  double quad = 0.0;
  for (int i = 0; i < kNumBeams; ++i) {
    const double d = obs.readings[i] - eval.mean[i];
    quad += d * d;
  }
  return -0.5 * kNumBeams * std::log(2.0 * kPi) - kNumBeams * std::log(model.sigma_e) -
         0.5 * quad / var;
}

double emission_logpdf(const EmissionModel& model, std::span<const double> chart, double heading,
                       const sim::LidarScan& obs) {
  EmissionEval eval;
  emission_forward(model, chart, heading, eval);
  return emission_logpdf(model, eval, obs);
}

void emission_mean_backward(const EmissionModel& model, const EmissionEval& eval,
                            std::span<const double> mean_grad, std::span<double> chart_grad,
                            nn::NetGrads* param_grads, double* heading_grad) {
  // unshift: transpose of the interpolation scatter
  const double shift = eval.heading / sim::kBeamStep;
  const double base = std::floor(shift);
  const double frac = shift - base;
  const int k0 = static_cast<int>(base);
  std::array<double, kNumBeams> canon_grad{};
  double dshift = 0.0;
  for (int i = 0; i < kNumBeams; ++i) {
    const int a = mod_beams(i + k0);
    const int b = mod_beams(i + k0 + 1);
    canon_grad[a] += (1.0 - frac) * mean_grad[i];
    canon_grad[b] += frac * mean_grad[i];
    dshift += (eval.canonical[b] - eval.canonical[a]) * mean_grad[i];
  }
  if (heading_grad) *heading_grad += dshift / sim::kBeamStep;
  std::vector<double> raw_grad(kNumBeams);
  for (int i = 0; i < kNumBeams; ++i) {
    const double s = logistic(eval.raw[i]);
    raw_grad[i] = canon_grad[i] * kMaxRange * s * (1.0 - s);
  }
  const std::vector<double> in_grad = nn::backward(model.net, eval.tape, raw_grad, param_grads);
  require(in_grad.size() == chart_grad.size(), ErrorCode::invalid_argument,
          "chart grad size mismatch");
  for (size_t c = 0; c < chart_grad.size(); ++c) chart_grad[c] += in_grad[c];
}

void emission_logpdf_backward(const EmissionModel& model, const EmissionEval& eval,
                              const sim::LidarScan& obs, double scale,
                              std::span<double> chart_grad, nn::NetGrads* param_grads,
                              double* heading_grad) {
  const double var = model.sigma_e * model.sigma_e;
  std::array<double, kNumBeams> mean_grad{};
  for (int i = 0; i < kNumBeams; ++i)
    mean_grad[i] = scale * (obs.readings[i] - eval.mean[i]) / var;
  emission_mean_backward(model, eval, mean_grad, chart_grad, param_grads, heading_grad);
}

TransitionModel make_learned_transition(const std::vector<int>& hidden, double sigma_t, Rng& rng) {
  TransitionModel m;
  m.variant = TransitionModel::Variant::learned;
  m.sigma_t = sigma_t;
  // input: x, y, cos(theta), sin(theta), dtheta, forward, predicted scan
  std::vector<int> sizes{6 + kNumBeams};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(3);
  m.net = nn::make_dense_net(sizes, nn::Activation::relu, nn::Activation::identity, rng);
  return m;
}

namespace {

// interpolated reading at a fractional beam position
double scan_at(const std::array<double, kNumBeams>& readings, double beam_pos) {
  const double base = std::floor(beam_pos);
  const double frac = beam_pos - base;
  const int a = mod_beams(static_cast<int>(base));
  const int b = mod_beams(static_cast<int>(base) + 1);
  return (1.0 - frac) * readings[a] + frac * readings[b];
}

}  // namespace

Pose transition_engineered(const Pose& pose, const sim::Control& u,
                           const sim::LidarScan& predicted, double margin) {
  Pose out = pose;
  out.theta = wrap_angle(pose.theta + u.dtheta);
  // predicted scan was taken at the old heading; the new heading sits at
  // relative beam position dtheta / beam step
  const double front = scan_at(predicted.readings, u.dtheta / sim::kBeamStep);
  double travel = u.forward;
  if (u.forward > front) travel = std::max(0.0, front - margin);
  out.x += travel * std::cos(out.theta);
  out.y += travel * std::sin(out.theta);
  return out;
}

Pose transition_smooth(const Pose& pose, const sim::Control& u) {
  Pose out = pose;
  out.theta = wrap_angle(pose.theta + u.dtheta);
  out.x += u.forward * std::cos(out.theta);
  out.y += u.forward * std::sin(out.theta);
  return out;
}

std::vector<double> transition_input(const Pose& pose, const sim::Control& u,
                                     std::span<const double> predicted_mean) {
  std::vector<double> in;
  in.reserve(6 + predicted_mean.size());
  in.push_back(pose.x);
  in.push_back(pose.y);
  in.push_back(std::cos(pose.theta));
  in.push_back(std::sin(pose.theta));
  in.push_back(u.dtheta);
  in.push_back(u.forward);
  in.insert(in.end(), predicted_mean.begin(), predicted_mean.end());
  return in;
}

Pose transition_learned_mean(const TransitionModel& model, const Pose& pose, const sim::Control& u,
                             std::span<const double> predicted_mean) {
  require(model.variant == TransitionModel::Variant::learned, ErrorCode::unsupported,
          "engineered transition has no learned mean");
  const std::vector<double> in = transition_input(pose, u, predicted_mean);
  const std::vector<double> delta = nn::forward(model.net, in);
  Pose out;
  out.x = pose.x + delta[0];
  out.y = pose.y + delta[1];
  out.theta = wrap_angle(pose.theta + delta[2]);
  return out;
}

Pose transition_mean_in_model(const TransitionModel& model, const EmissionModel& emission,
                              const MapRealization& map, const Pose& pose, const sim::Control& u) {
  std::vector<double> chart(map.d);
  attend_into(map, pose.x, pose.y, chart);
  const sim::LidarScan predicted = emission_mean(emission, chart, pose.theta);
  if (model.variant == TransitionModel::Variant::engineered)
    return transition_engineered(pose, u, predicted, model.margin);
  return transition_learned_mean(model, pose, u,
                                 std::span<const double>(predicted.readings.data(), kNumBeams));
}

Pose transition_sample_in_model(const TransitionModel& model, const EmissionModel& emission,
                                const MapRealization& map, const Pose& pose, const sim::Control& u,
                                Rng& rng) {
  Pose mean = transition_mean_in_model(model, emission, map, pose, u);
  if (model.sigma_t > 0.0) {
    mean.x += model.sigma_t * rng.normal();
    mean.y += model.sigma_t * rng.normal();
    mean.theta = wrap_angle(mean.theta + model.sigma_t * rng.normal());
  }
  return mean;
}

TransitionTrainReport train_transition(TransitionModel& model,
                                       const std::vector<TransitionSample>& data,
                                       const TransitionTrainConfig& cfg) {
  require(!data.empty(), ErrorCode::invalid_argument, "empty transition dataset");
  require(model.variant == TransitionModel::Variant::learned, ErrorCode::unsupported,
          "train_transition requires the learned variant");
  Rng rng(cfg.seed ^ 0x7472616eULL);
  std::vector<size_t> order(data.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.uniform_int(i)]);
  const size_t n_holdout = std::min(data.size() - 1, static_cast<size_t>(std::llround(
                                                         cfg.holdout_fraction * data.size())));
  const size_t n_train = data.size() - n_holdout;

  nn::Adam adam(model.net.param_count(), {cfg.lr, 0.9, 0.999, 1e-8});
  nn::NetGrads grads;
  grads.init_like(model.net);
  TransitionTrainReport report;

  auto target_delta = [](const TransitionSample& s) {
    return std::array<double, 3>{s.next.x - s.pose.x, s.next.y - s.pose.y,
                                 wrap_angle(s.next.theta - s.pose.theta)};
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_loss = 0.0;
    size_t seen = 0;
    for (size_t start = 0; start < n_train; start += cfg.batch) {
      const size_t end = std::min(n_train, start + cfg.batch);
      grads.zero();
      double batch_loss = 0.0;
      for (size_t i = start; i < end; ++i) {
        const TransitionSample& s = data[order[i]];
        const std::vector<double> in = transition_input(
            s.pose, s.u, std::span<const double>(s.scan.readings.data(), kNumBeams));
        nn::Tape tape;
        const std::vector<double> out = nn::forward(model.net, in, &tape);
        const auto tgt = target_delta(s);
        std::vector<double> out_grad(3);
        for (int k = 0; k < 3; ++k) {
          const double diff = out[k] - tgt[k];
          batch_loss += diff * diff;
          out_grad[k] = 2.0 * diff / static_cast<double>(end - start);
        }
        nn::backward(model.net, tape, out_grad, &grads);
      }
      adam.step(model.net.param_views(), grads.views());
      epoch_loss += batch_loss;
      seen += end - start;
    }
    report.epoch_train_loss.push_back(epoch_loss / std::max<size_t>(1, seen));
  }

  double sq_pos_err = 0.0;
  const size_t n_eval = n_holdout > 0 ? n_holdout : data.size();
  for (size_t i = 0; i < n_eval; ++i) {
    const TransitionSample& s = data[order[n_holdout > 0 ? n_train + i : i]];
    const Pose pred = transition_learned_mean(
        model, s.pose, s.u, std::span<const double>(s.scan.readings.data(), kNumBeams));
    const double dx = pred.x - s.next.x, dy = pred.y - s.next.y;
    sq_pos_err += dx * dx + dy * dy;
  }
  report.final_holdout_rmse = std::sqrt(sq_pos_err / n_eval);
  return report;
}

AncestralResult ancestral_sample(const MapRealization& map, const Pose& start,
                                 std::span<const sim::Control> controls,
                                 const TransitionModel& transition, const EmissionModel& emission,
                                 Rng& rng) {
  require(!controls.empty(), ErrorCode::invalid_argument, "horizon must be >= 1");
  AncestralResult res;
  res.poses.reserve(controls.size());
  res.obs_concat.reserve(controls.size() * kNumBeams);
  Pose pose = start;
  std::vector<double> chart(map.d);
  for (const auto& u : controls) {
    pose = transition_sample_in_model(transition, emission, map, pose, u, rng);
    pose.x = std::clamp(pose.x, 0.0, 1.0);
    pose.y = std::clamp(pose.y, 0.0, 1.0);
    res.poses.push_back(pose);
    attend_into(map, pose.x, pose.y, chart);
    const sim::LidarScan mean = emission_mean(emission, chart, pose.theta);
    for (int k = 0; k < kNumBeams; ++k)
      res.obs_concat.push_back(mean.readings[k] + emission.sigma_e * rng.normal());
  }
  return res;
}

}  // namespace latmap::gm
