#include "preprocessing.hpp"
#include "protocol.hpp"

namespace sftl {

// Exact preprocessing demand: walk the real training/prediction circuit
// with a counting engine over zero-valued data of the requested shape.
MaterialCounts count_required_material(const TrainShape& shape, EngineKind engine) {
  std::uint32_t rows = std::max<std::uint32_t>(1, shape.n_source);
  SourceData src;
  src.x = Mat(rows, shape.in_source);
  src.y.assign(rows, 1.0);
  src.labeled_y.assign(shape.n_labeled, 1.0);
  src.overlap_rows.resize(shape.n_overlap);
  for (std::uint32_t k = 0; k < shape.n_overlap; ++k) src.overlap_rows[k] = k % rows;

  SessionParams p;
  p.engine = engine;
  p.d = shape.hidden;
  p.hp.max_iter = shape.max_iter;
  JointDims dims;
  dims.n_labeled = shape.n_labeled;
  dims.n_overlap = shape.n_overlap;
  dims.d = shape.hidden;
  dims.in_s = shape.in_source;
  dims.in_t = shape.in_target;

  CountingEngine eng(PartyRole::Source, p.codec, engine);
  run_training(eng, p, dims, &src, nullptr, nullptr);
  MaterialCounts mc = eng.demand();

  if (shape.predict_samples) {
    CountingEngine pe(PartyRole::Source, p.codec, engine);
    std::vector<double> lambda(shape.hidden, 0.0);
    run_predict(pe, lambda, nullptr, shape.predict_samples, shape.hidden);
    mc += pe.demand();
  }
  return mc;
}

}  // namespace sftl
