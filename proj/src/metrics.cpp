#include "medgrpo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "medgrpo/errors.hpp"

namespace medgrpo::metrics {

bool TemporalInterval::is_valid() const {
  return std::isfinite(start) && std::isfinite(end) && start >= 0.0 && start <= end;
}

bool BBox::is_valid() const {
  return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2) &&
         x1 >= 0.0 && y1 >= 0.0 && x2 <= 1.0 && y2 <= 1.0 && x1 <= x2 && y1 <= y2;
}

namespace {

void require_valid(const TemporalInterval& iv, const char* who) {
  if (!iv.is_valid()) {
    throw ValidationError(std::string(who) + ": interval must satisfy 0 <= start <= end");
  }
}

void require_valid(const BBox& b, const char* who) {
  if (!b.is_valid()) {
    throw ValidationError(std::string(who) +
                          ": box must satisfy 0 <= x1 <= x2 <= 1 and 0 <= y1 <= y2 <= 1");
  }
}

}  // namespace

double temporal_iou(const TemporalInterval& a, const TemporalInterval& b) {
  require_valid(a, "temporal_iou");
  require_valid(b, "temporal_iou");
  double inter = std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
  double uni = a.length() + b.length() - inter;
  if (uni <= 0.0) {
    return (a.start == b.start && a.end == b.end) ? 1.0 : 0.0;
  }
  return inter / uni;
}

double box_iou(const BBox& a, const BBox& b) {
  require_valid(a, "box_iou");
  require_valid(b, "box_iou");
  double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  double inter = iw * ih;
  double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) {
    bool identical = a.x1 == b.x1 && a.y1 == b.y1 && a.x2 == b.x2 && a.y2 == b.y2;
    return identical ? 1.0 : 0.0;
  }
  return inter / uni;
}

double stg_miou(const FrameTrack& pred, const FrameTrack& gt) {
  if (gt.frames.empty()) {
    throw ValidationError("stg_miou: ground-truth track has no frames");
  }
  for (const auto& [idx, box] : gt.frames) require_valid(box, "stg_miou");
  for (const auto& [idx, box] : pred.frames) require_valid(box, "stg_miou");
  double sum = 0.0;
  for (const auto& [idx, gt_box] : gt.frames) {
    auto it = pred.frames.find(idx);
    if (it != pred.frames.end()) sum += box_iou(it->second, gt_box);
  }
  return sum / static_cast<double>(gt.frames.size());
}

double mean_temporal_iou(const std::vector<TemporalInterval>& preds,
                         const std::vector<TemporalInterval>& gts) {
  if (preds.empty() || gts.empty()) {
    throw ValidationError("mean_temporal_iou: interval lists must be non-empty");
  }
  if (preds.size() != gts.size()) {
    throw ValidationError("mean_temporal_iou: prediction and ground-truth counts differ");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) sum += temporal_iou(preds[i], gts[i]);
  return sum / static_cast<double>(preds.size());
}

double dvc_f1(const std::vector<DenseEvent>& preds, const std::vector<DenseEvent>& gts,
              double tiou_threshold) {
  if (!(tiou_threshold > 0.0 && tiou_threshold <= 1.0)) {
    throw ValidationError("dvc_f1: tiou_threshold must lie in (0, 1]");
  }
  for (const auto& e : preds) {
    require_valid(e.interval, "dvc_f1");
    if (e.caption.empty()) throw ValidationError("dvc_f1: event caption must be non-empty");
  }
  for (const auto& e : gts) {
    require_valid(e.interval, "dvc_f1");
    if (e.caption.empty()) throw ValidationError("dvc_f1: event caption must be non-empty");
  }
  if (preds.empty() && gts.empty()) return 1.0;
  if (preds.empty() || gts.empty()) return 0.0;

  struct Pair {
    double iou;
    std::size_t p;
    std::size_t g;
  };
  std::vector<Pair> pairs;
  pairs.reserve(preds.size() * gts.size());
  for (std::size_t p = 0; p < preds.size(); ++p) {
    for (std::size_t g = 0; g < gts.size(); ++g) {
      double iou = temporal_iou(preds[p].interval, gts[g].interval);
      if (iou >= tiou_threshold) pairs.push_back({iou, p, g});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    return std::tie(b.iou, a.p, a.g) < std::tie(a.iou, b.p, b.g);
  });

  std::vector<bool> p_used(preds.size(), false);
  std::vector<bool> g_used(gts.size(), false);
  std::size_t tp = 0;
  for (const Pair& pr : pairs) {
    if (p_used[pr.p] || g_used[pr.g]) continue;
    p_used[pr.p] = true;
    g_used[pr.g] = true;
    ++tp;
  }
  std::size_t fp = preds.size() - tp;
  std::size_t fn = gts.size() - tp;
  double denom = static_cast<double>(2 * tp + fp + fn);
  return denom > 0.0 ? (2.0 * static_cast<double>(tp)) / denom : 0.0;
}

}  // namespace medgrpo::metrics
