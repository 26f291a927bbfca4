// Copyright 2026 The GeoConv Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "geoconv/ablation.hpp"

#include <cmath>
#include <iomanip>
#include <memory>
#include <sstream>

#include "geoconv/errors.hpp"

namespace geoconv {

AblationVariant AblationVariant::parse(const std::string& text, std::size_t geoLayers) {
  AblationVariant v;
  v.name = text;
  if (text == "w/o HC" || text == "w/o BW") {
    v.mask.assign(geoLayers, true);
    v.hierarchyCompensation = text != "w/o HC";
    v.balanced = text != "w/o BW";
    return v;
  }
  v.mask = NetSpec::parseMask(text);
  if (v.mask.size() != geoLayers)
    throw ValidationError("variant '" + text + "' has " + std::to_string(v.mask.size()) + " mask bits, the geo branch has " +
                          std::to_string(geoLayers) + " convolutions");
  NetSpec s;
  s.geoMask = v.mask;
  v.name = s.maskName();
  return v;
}

std::vector<AblationRow> runAblation(const SyntheticAuDataset& data, const MorphableModel* model,
                                     std::span<const AblationVariant> variants, const AblationSetup& setup,
                                     std::ostream* progress) {
  if (setup.seeds.empty()) throw ValidationError("ablation needs at least one seed");
  std::unique_ptr<SyntheticAuDataset> withoutHc;
  std::vector<AblationRow> rows;
  for (const auto& v : variants) {
    const SyntheticAuDataset* d = &data;
    if (!v.hierarchyCompensation) {
      if (!withoutHc) {
        if (!model) throw ValidationError("variant '" + v.name + "' needs the morphable model to recompile weights");
        withoutHc = std::make_unique<SyntheticAuDataset>(data);
        WeightOptions opts;
        const auto& m = data.metadata;
        opts.clampRatio = m.value("clampRatio", opts.clampRatio);
        opts.heat.tScale = m.value("tScale", opts.heat.tScale);
        opts.hierarchyCompensation = false;
        const auto arch = architectureFromJson(m.at("architecture"));
        if (progress) *progress << "recompiling weight stacks without hierarchy compensation\n" << std::flush;
        recompileWeightStacks(*withoutHc, *model, opts, arch);
      }
      d = withoutHc.get();
    }
    AblationRow row;
    row.name = v.name;
    row.perAuF1.assign(data.nAu, 0.0);
    for (auto seed : setup.seeds) {
      NetSpec spec = setup.base;
      spec.geoMask = v.mask;
      Network net(spec, seed);
      TrainOptions opt = setup.training;
      opt.balanced = v.balanced;
      opt.seed = seed;
      const auto log = trainEpochs(net, *d, opt);
      const auto ev = evaluate(net, *d);
      for (std::size_t i = 0; i < data.nAu; ++i) row.perAuF1[i] += ev.f1.perAu[i] / static_cast<double>(setup.seeds.size());
      row.avgF1 += ev.f1.average / static_cast<double>(setup.seeds.size());
      row.seedAvgF1.push_back(ev.f1.average);
      row.finalLoss.push_back(log.empty() ? std::nan("") : log.back().loss);
      if (progress)
        *progress << v.name << " seed " << seed << ": test avgF1 " << std::fixed << std::setprecision(1)
                  << ev.f1.average << std::defaultfloat << "\n"
                  << std::flush;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void writeF1Table(std::ostream& out, std::span<const AblationRow> rows, std::size_t nAu, const F1Result& chance) {
  out << "variant";
  for (std::size_t i = 0; i < nAu; ++i) out << "\tAU" << i + 1;
  out << "\tavg\n";
  auto fmt = [](double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(1) << v;
    return s.str();
  };
  for (const auto& r : rows) {
    out << r.name;
    for (double f : r.perAuF1) out << '\t' << fmt(f);
    out << '\t' << fmt(r.avgF1) << '\n';
  }
  out << "chance";
  for (double f : chance.perAu) out << '\t' << fmt(f);
  out << '\t' << fmt(chance.average) << '\n';
}

}  // namespace geoconv
