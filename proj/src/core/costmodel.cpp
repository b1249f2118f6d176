#include "core/costmodel.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"

namespace xbt {

using nlohmann::json;

const DeviceFigures& PeripheryCatalog::dac(int bits) const {
  if (bits == 4) return dac4;
  if (bits == 8) return dac8;
  raise(ErrorCode::catalog, "no DAC entry for " + std::to_string(bits) + " bits");
}

const DeviceFigures& PeripheryCatalog::adc(int bits) const {
  if (bits == 4) return adc4;
  if (bits == 8) return adc8;
  raise(ErrorCode::catalog, "no ADC entry for " + std::to_string(bits) + " bits");
}

void PeripheryCatalog::validate() const {
  for (const DeviceFigures* f : {&dac4, &dac8, &adc4, &adc8}) {
    require(f->power_10mhz > 0.0 && f->power_100mhz > 0.0 && f->area_um2 > 0.0,
            ErrorCode::catalog, "catalog figures must be positive");
  }
  require(nvm_read_power > 0.0 && nvm_cell_area_um2 > 0.0, ErrorCode::catalog,
          "NVM figures must be positive");
}

namespace {

DeviceFigures figures_from_json(const json& j) {
  DeviceFigures f;
  f.power_10mhz = j.at("power_10mhz").get<double>();
  f.power_100mhz = j.at("power_100mhz").get<double>();
  f.area_um2 = j.at("area_um2").get<double>();
  return f;
}

json figures_to_json(const DeviceFigures& f) {
  return json{{"power_10mhz", f.power_10mhz},
              {"power_100mhz", f.power_100mhz},
              {"area_um2", f.area_um2}};
}

}  // namespace

PeripheryCatalog catalog_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    raise(ErrorCode::format, std::string("catalog is not valid JSON: ") + e.what());
  }
  PeripheryCatalog c;
  if (j.contains("dac4")) c.dac4 = figures_from_json(j["dac4"]);
  if (j.contains("dac8")) c.dac8 = figures_from_json(j["dac8"]);
  if (j.contains("adc4")) c.adc4 = figures_from_json(j["adc4"]);
  if (j.contains("adc8")) c.adc8 = figures_from_json(j["adc8"]);
  c.nvm_read_power = j.value("nvm_read_power", c.nvm_read_power);
  c.nvm_cell_area_um2 = j.value("nvm_cell_area_um2", c.nvm_cell_area_um2);
  c.subtractor_power_frac = j.value("subtractor_power_frac", c.subtractor_power_frac);
  c.subtractor_area_frac = j.value("subtractor_area_frac", c.subtractor_area_frac);
  c.current_scaling_power_frac = j.value("current_scaling_power_frac", c.current_scaling_power_frac);
  c.validate();
  return c;
}

std::string catalog_to_json(const PeripheryCatalog& c) {
  json j;
  j["dac4"] = figures_to_json(c.dac4);
  j["dac8"] = figures_to_json(c.dac8);
  j["adc4"] = figures_to_json(c.adc4);
  j["adc8"] = figures_to_json(c.adc8);
  j["nvm_read_power"] = c.nvm_read_power;
  j["nvm_cell_area_um2"] = c.nvm_cell_area_um2;
  j["subtractor_power_frac"] = c.subtractor_power_frac;
  j["subtractor_area_frac"] = c.subtractor_area_frac;
  j["current_scaling_power_frac"] = c.current_scaling_power_frac;
  return j.dump(1);
}

double frequency_hz(Frequency f) { return f == Frequency::mhz10 ? 10e6 : 100e6; }

OpCounts count_ops(const NetworkGraph& net, const std::optional<Polarity>& polarity_override) {
  const std::vector<LayerGeometry> geom = network_geometry(net);
  OpCounts oc;
  for (size_t li = 0; li < net.layers.size(); ++li) {
    const LayerSpec& l = net.layers[li];
    if (!l.trainable()) continue;
    require(l.in_dim > 0 && l.out_dim > 0, ErrorCode::argument,
            "unresolved shapes in layer " + l.name);
    int64_t macs;
    int64_t inputs, outputs;
    if (l.kind == LayerKind::conv2d) {
      const int64_t positions = geom[li].positions;
      macs = static_cast<int64_t>(l.out_dim) * l.kh * l.kw * l.in_dim * positions;
      inputs = shape_numel(geom[li].in);
      outputs = static_cast<int64_t>(l.out_dim) * positions;
    } else {
      macs = static_cast<int64_t>(l.in_dim) * l.out_dim;
      inputs = l.in_dim;
      outputs = l.out_dim;
    }
    Polarity pol = l.polarity;
    if (polarity_override && l.binding == QuantBinding::global) pol = *polarity_override;
    double p;  // unipolar share of the columns
    switch (pol.mode) {
      case PolarityMode::unipolar: p = 1.0; break;
      case PolarityMode::bipolar: p = 0.0; break;
      case PolarityMode::fractional:
        p = static_cast<double>(pol.unipolar_channels(l.out_dim)) / l.out_dim;
        break;
      default: p = 0.0; break;
    }
    oc.nvm_reads_pos += macs;
    oc.nvm_reads_neg += static_cast<int64_t>(std::llround((1.0 - p) * static_cast<double>(macs)));
    oc.dac_ops += inputs;
    oc.adc_ops += outputs;
  }
  return oc;
}

ComponentCounts counts_from_deployment(const CrossbarDeployment& dep) {
  ComponentCounts c;
  c.crossbars = static_cast<int64_t>(dep.tiles.size());
  c.tile_rows = dep.tile_rows;
  c.tile_cols = dep.tile_cols;
  // One multiplexed DAC per tile row and ADC per tile column.
  c.dacs = dep.tile_rows;
  c.adcs = dep.tile_cols;
  c.subtractors = dep.subtractor_pairs() > 0 ? c.adcs : 0;
  c.dac_bits = dep.layers.empty() ? 4 : dep.layers.front().dac.bits;
  c.adc_bits = dep.layers.empty() ? 4 : dep.layers.front().adc.bits;
  return c;
}

EnergyBreakdown energy_estimate(const OpCounts& counts, const PeripheryCatalog& catalog,
                                Frequency freq, int dac_bits, int adc_bits,
                                const EnergyContext& ctx) {
  catalog.validate();
  require(counts.nvm_reads_pos >= 0 && counts.nvm_reads_neg >= 0 && counts.dac_ops >= 0 &&
              counts.adc_ops >= 0,
          ErrorCode::argument, "negative operation count");
  const double f = frequency_hz(freq);
  const double t = 1.0 / f;
  const DeviceFigures& dacf = catalog.dac(dac_bits);
  const DeviceFigures& adcf = catalog.adc(adc_bits);
  const double p_dac = freq == Frequency::mhz10 ? dacf.power_10mhz : dacf.power_100mhz;
  const double p_adc = freq == Frequency::mhz10 ? adcf.power_10mhz : adcf.power_100mhz;

  EnergyBreakdown e;
  e.nvm_pos = static_cast<double>(counts.nvm_reads_pos) * catalog.nvm_read_power * t;
  e.nvm_neg = static_cast<double>(counts.nvm_reads_neg) * catalog.nvm_read_power * t;
  e.dac = static_cast<double>(counts.dac_ops) * p_dac * t;
  double overhead = 1.0;
  if (ctx.bipolar_present) overhead += catalog.subtractor_power_frac;
  if (!ctx.uniform_scaling) overhead += catalog.current_scaling_power_frac;
  e.adc = static_cast<double>(counts.adc_ops) * p_adc * t * overhead;
  return e;
}

AreaBreakdown area_estimate(const ComponentCounts& c, const PeripheryCatalog& catalog) {
  catalog.validate();
  AreaBreakdown a;
  const double um2_to_mm2 = 1e-6;
  a.crossbars_mm2 = static_cast<double>(c.crossbars) * c.tile_rows * c.tile_cols *
                    catalog.nvm_cell_area_um2 * um2_to_mm2;
  a.dac_mm2 = static_cast<double>(c.dacs) * catalog.dac(c.dac_bits).area_um2 * um2_to_mm2;
  a.adc_mm2 = static_cast<double>(c.adcs) * catalog.adc(c.adc_bits).area_um2 * um2_to_mm2;
  a.subtractor_mm2 = static_cast<double>(c.subtractors) * catalog.subtractor_area_frac *
                     catalog.adc(c.adc_bits).area_um2 * um2_to_mm2;
  return a;
}

CostReport make_report(const std::string& label, const OpCounts& counts,
                       const ComponentCounts& components, const PeripheryCatalog& catalog,
                       const EnergyContext& ctx, bool reconfigurable) {
  CostReport r;
  r.label = label;
  r.counts = counts;
  r.components = components;
  r.energy_10mhz = energy_estimate(counts, catalog, Frequency::mhz10, components.dac_bits,
                                   components.adc_bits, ctx);
  r.energy_100mhz = energy_estimate(counts, catalog, Frequency::mhz100, components.dac_bits,
                                    components.adc_bits, ctx);
  r.area = area_estimate(components, catalog);
  r.reconfigurable = reconfigurable;
  return r;
}

SavingsReport savings_report(const CostReport& baseline, const CostReport& proposed) {
  require(baseline.energy_10mhz.total() > 0.0 && baseline.energy_100mhz.total() > 0.0 &&
              baseline.area.total_mm2() > 0.0,
          ErrorCode::argument, "baseline totals must be non-zero");
  SavingsReport s;
  s.energy_ratio_10mhz = proposed.energy_10mhz.total() / baseline.energy_10mhz.total();
  s.energy_ratio_100mhz = proposed.energy_100mhz.total() / baseline.energy_100mhz.total();
  s.area_ratio = proposed.area.total_mm2() / baseline.area.total_mm2();
  s.energy_saving_10mhz = 1.0 - s.energy_ratio_10mhz;
  s.energy_saving_100mhz = 1.0 - s.energy_ratio_100mhz;
  s.area_saving = 1.0 - s.area_ratio;
  return s;
}

std::string report_to_json(const CostReport& r) {
  json j;
  j["label"] = r.label;
  j["counts"] = {{"nvm_reads_pos", r.counts.nvm_reads_pos},
                 {"nvm_reads_neg", r.counts.nvm_reads_neg},
                 {"dac_ops", r.counts.dac_ops},
                 {"adc_ops", r.counts.adc_ops}};
  j["components"] = {{"crossbars", r.components.crossbars}, {"dacs", r.components.dacs},
                     {"adcs", r.components.adcs},           {"subtractors", r.components.subtractors},
                     {"dac_bits", r.components.dac_bits},   {"adc_bits", r.components.adc_bits},
                     {"tile_rows", r.components.tile_rows}, {"tile_cols", r.components.tile_cols}};
  auto energy = [](const EnergyBreakdown& e) {
    return json{{"nvm_pos_j", e.nvm_pos}, {"nvm_neg_j", e.nvm_neg}, {"dac_j", e.dac},
                {"adc_j", e.adc},         {"total_j", e.total()}};
  };
  j["energy_10mhz"] = energy(r.energy_10mhz);
  j["energy_100mhz"] = energy(r.energy_100mhz);
  j["area"] = {{"crossbars_mm2", r.area.crossbars_mm2},
               {"dac_mm2", r.area.dac_mm2},
               {"adc_mm2", r.area.adc_mm2},
               {"subtractor_mm2", r.area.subtractor_mm2},
               {"total_mm2", r.area.total_mm2()}};
  j["reconfigurable"] = r.reconfigurable;
  j["notes"] = r.notes;
  return j.dump(1);
}

namespace {

std::string eng(double joules) {
  char buf[64];
  if (joules >= 1e-6) std::snprintf(buf, sizeof buf, "%8.3f uJ", joules * 1e6);
  else if (joules >= 1e-9) std::snprintf(buf, sizeof buf, "%8.3f nJ", joules * 1e9);
  else std::snprintf(buf, sizeof buf, "%8.3f pJ", joules * 1e12);
  return buf;
}

}  // namespace

std::string report_to_text(const CostReport& r) {
  std::ostringstream os;
  char buf[160];
  os << "Cost report: " << r.label << "\n";
  os << "  reconfigurable: " << (r.reconfigurable ? "yes" : "no") << "\n";
  std::snprintf(buf, sizeof buf, "  %-22s %12lld\n", "crossbars", (long long)r.components.crossbars);
  os << buf;
  std::snprintf(buf, sizeof buf, "  %-22s %12lld (%d-bit)\n", "DACs",
                (long long)r.components.dacs, r.components.dac_bits);
  os << buf;
  std::snprintf(buf, sizeof buf, "  %-22s %12lld (%d-bit)\n", "ADCs",
                (long long)r.components.adcs, r.components.adc_bits);
  os << buf;
  std::snprintf(buf, sizeof buf, "  %-22s %12lld\n", "current subtractors",
                (long long)r.components.subtractors);
  os << buf;
  os << "  energy per inference          10 MHz         100 MHz\n";
  std::snprintf(buf, sizeof buf, "    NVM (+)  %10lld reads  %s    %s\n",
                (long long)r.counts.nvm_reads_pos, eng(r.energy_10mhz.nvm_pos).c_str(),
                eng(r.energy_100mhz.nvm_pos).c_str());
  os << buf;
  std::snprintf(buf, sizeof buf, "    NVM (-)  %10lld reads  %s    %s\n",
                (long long)r.counts.nvm_reads_neg, eng(r.energy_10mhz.nvm_neg).c_str(),
                eng(r.energy_100mhz.nvm_neg).c_str());
  os << buf;
  std::snprintf(buf, sizeof buf, "    DAC ops  %10lld        %s    %s\n",
                (long long)r.counts.dac_ops, eng(r.energy_10mhz.dac).c_str(),
                eng(r.energy_100mhz.dac).c_str());
  os << buf;
  std::snprintf(buf, sizeof buf, "    ADC ops  %10lld        %s    %s\n",
                (long long)r.counts.adc_ops, eng(r.energy_10mhz.adc).c_str(),
                eng(r.energy_100mhz.adc).c_str());
  os << buf;
  std::snprintf(buf, sizeof buf, "    total                      %s    %s\n",
                eng(r.energy_10mhz.total()).c_str(), eng(r.energy_100mhz.total()).c_str());
  os << buf;
  std::snprintf(buf, sizeof buf,
                "  area: crossbars %.4f + DAC %.4f + ADC %.4f + sub %.4f = %.4f mm^2\n",
                r.area.crossbars_mm2, r.area.dac_mm2, r.area.adc_mm2, r.area.subtractor_mm2,
                r.area.total_mm2());
  os << buf;
  for (const auto& n : r.notes) os << "  note: " << n << "\n";
  return os.str();
}

std::string savings_to_text(const SavingsReport& s) {
  std::ostringstream os;
  char buf[120];
  std::snprintf(buf, sizeof buf, "energy: %.1f%% saved @10MHz, %.1f%% saved @100MHz\n",
                s.energy_saving_10mhz * 100.0, s.energy_saving_100mhz * 100.0);
  os << buf;
  std::snprintf(buf, sizeof buf, "area:   %.1f%% saved (ratio %.3f)\n", s.area_saving * 100.0,
                s.area_ratio);
  os << buf;
  return os.str();
}

std::vector<PresetRow> published_rows() {
  std::vector<PresetRow> rows;
  auto add = [&](const std::string& name, int64_t pos, int64_t neg, int64_t dac, int64_t adc,
                 int64_t xbars, int64_t dacs, int64_t adcs, int64_t subs, int dac_bits,
                 int adc_bits, bool bipolar, bool uniform, bool reconf, const std::string& note) {
    PresetRow r;
    r.name = name;
    r.counts = {pos, neg, dac, adc};
    r.components = {xbars, dacs, adcs, subs, dac_bits, adc_bits, 128, 128};
    r.ctx = {bipolar, uniform};
    r.reconfigurable = reconf;
    r.note = note;
    rows.push_back(r);
  };
  // CIFAR10 rows: ~77e6 reads total (split evenly across polarities), 75e3
  // DAC ops, 115e3 ADC ops.
  add("cifar10-tf-8b", 38500000, 38500000, 75000, 115000, 44, 448, 896, 896, 8, 8, true, false,
      false, "");
  add("cifar10-tf-4b", 38500000, 38500000, 75000, 115000, 44, 448, 896, 896, 4, 4, true, false,
      false, "");
  add("cifar10-ours-4b", 38500000, 38500000, 75000, 115000, 44, 128, 256, 256, 4, 4, true, true,
      true,
      "published row lists 256 ADCs but its 0.22 mm^2 total matches 128; both readings reported");
  add("cifar10-ours-4b-128adc", 38500000, 38500000, 75000, 115000, 44, 128, 128, 128, 4, 4, true,
      true, true, "area-consistent reading of the published proposed row");
  // HAR rows: ~34e3 reads per polarity, 384 DAC ops, 268 ADC ops.
  add("har-tf-8b", 34000, 34000, 384, 268, 6, 384, 268, 268, 8, 8, true, false, false, "");
  add("har-tf-4b", 34000, 34000, 384, 268, 6, 384, 268, 268, 4, 4, true, false, false, "");
  add("har-ours-4b", 34000, 0, 384, 268, 3, 128, 256, 0, 4, 4, false, true, true, "");
  return rows;
}

}  // namespace xbt
