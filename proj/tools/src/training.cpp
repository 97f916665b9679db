// Copyright 2026 The PartGen Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "partgen/tools/training.hpp"

#include <iomanip>

#include "partgen/error.hpp"

namespace partgen::tools {

namespace {

TrainLogger make_logger(const TrainLog& log, const char* stage) {
  if (!log.out) return {};
  return [&log, stage](int it, double loss, double lr) {
    if (it % log.every != 0) return;
    *log.out << stage << " iter " << it << " loss " << std::setprecision(5) << loss << " lr " << lr << "\n";
    log.out->flush();
  };
}

void require_samples(std::span<const ObjectSample> samples) {
  if (samples.empty()) throw Error(ErrorCode::kEmptyInput, "training corpus is empty");
}

}  // namespace

LayoutModel train_layout(std::span<const ObjectSample> samples, const Settings& s, const TrainLog& log) {
  require_samples(samples);
  LayoutModel model(layout_model_config(s.layout.model, BoxCodec(s.layout_tokens, s.layout_channels)));
  const double err = model.codec.train(s.codec);
  if (log.out) *log.out << "codec corner error " << err << "\n";
  model.filter.nms_iou = s.nms_iou;
  std::vector<TrainItem<float>> items;
  for (const ObjectSample& o : samples) items.push_back(layout_item(model, o));
  train_model(
      model.dit, [&](std::size_t i, Rng&) { return items[i]; }, items.size(), s.layout.train,
      make_logger(log, "layout"));
  return model;
}

CoarseModel train_coarse(std::span<const ObjectSample> samples, const Settings& s, const TrainLog& log) {
  require_samples(samples);
  const CoarseOptions opts = s.coarse_options();
  CoarseModel model(coarse_model_config(s.coarse.model, opts), opts);
  ItemSource source;
  std::vector<TrainItem<float>> fixed;
  if (s.augment) {
    source = [&](std::size_t i, Rng& rng) { return coarse_item(samples[i], opts, s.kmax, &rng); };
  } else {
    for (const ObjectSample& o : samples) fixed.push_back(coarse_item(o, opts, s.kmax));
    source = [&](std::size_t i, Rng&) { return fixed[i]; };
  }
  train_model(model.dit, source, samples.size(), s.coarse.train, make_logger(log, "coarse"));
  return model;
}

RefineModel train_refine(std::span<const ObjectSample> samples, const Settings& s, const TrainLog& log) {
  require_samples(samples);
  const RefineOptions opts = s.refine_options();
  RefineModel model(refine_model_config(s.refine.model, opts), opts);
  std::vector<TrainItem<float>> items;
  for (const ObjectSample& o : samples) items.push_back(refine_item(o, opts, s.kmax));
  train_model(
      model.dit, [&](std::size_t i, Rng&) { return items[i]; }, items.size(), s.refine.train,
      make_logger(log, "refine"));
  return model;
}

Models train_all(std::span<const ObjectSample> samples, const Settings& s, const TrainLog& log) {
  LayoutModel layout = train_layout(samples, s, log);
  CoarseModel coarse = train_coarse(samples, s, log);
  RefineModel refine = train_refine(samples, s, log);
  return Models{std::move(layout), std::move(coarse), std::move(refine)};
}

}  // namespace partgen::tools
