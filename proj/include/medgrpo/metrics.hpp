#pragma once

#include <map>
#include <string>
#include <vector>

namespace medgrpo::metrics {

// Closed interval in seconds. Zero-length intervals are allowed.
struct TemporalInterval {
  double start = 0.0;
  double end = 0.0;

  double length() const { return end - start; }
  bool is_valid() const;
};

// Axis-aligned box with corner coordinates in [0, 1], x1 <= x2, y1 <= y2.
struct BBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double area() const { return (x2 - x1) * (y2 - y1); }
  bool is_valid() const;
};

// Boxes keyed by frame index; the map keeps indices strictly increasing.
struct FrameTrack {
  std::map<int, BBox> frames;
};

struct DenseEvent {
  TemporalInterval interval;
  std::string caption;
};

// Interval IoU. Identical zero-length intervals count as a perfect match;
// any other zero-length union scores 0.
double temporal_iou(const TemporalInterval& a, const TemporalInterval& b);

// Box IoU with the same degenerate-union convention.
double box_iou(const BBox& a, const BBox& b);

// Mean IoU over the ground-truth frames. A frame missing from the prediction
// contributes 0; predicted frames absent from the ground truth are ignored.
double stg_miou(const FrameTrack& pred, const FrameTrack& gt);

// Positionally paired mean interval IoU; lists must be non-empty and of
// equal length.
double mean_temporal_iou(const std::vector<TemporalInterval>& preds,
                         const std::vector<TemporalInterval>& gts);

// Dense-captioning F1 under greedy one-to-one matching: candidate pairs are
// visited in descending IoU order (ties broken by pred index, then gt index)
// and a pair matches when its IoU >= tiou_threshold. Both sides empty is a
// perfect 1.0.
double dvc_f1(const std::vector<DenseEvent>& preds, const std::vector<DenseEvent>& gts,
              double tiou_threshold);

}  // namespace medgrpo::metrics
