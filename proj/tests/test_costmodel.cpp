#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "core/costmodel.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace xbt;

namespace {

// Golden rows are printed with limited precision; a value passes when it is
// within the stated tolerance of the printed number or within half a unit of
// its last printed digit, whichever is looser.
void check_printed(double got, double printed, double pct, double last_digit) {
  const double tol = std::max(printed * pct, last_digit / 2.0);
  CAPTURE(got);
  CAPTURE(printed);
  CHECK(std::abs(got - printed) <= tol);
}

const PresetRow& row(const std::string& name) {
  static const std::vector<PresetRow> rows = published_rows();
  for (const auto& r : rows)
    if (r.name == name) return r;
  throw std::runtime_error("missing preset " + name);
}

CostReport report_for(const std::string& name) {
  const PresetRow& r = row(name);
  return make_report(r.name, r.counts, r.components, PeripheryCatalog{}, r.ctx, r.reconfigurable);
}

}  // namespace

TEST_CASE("catalog lookup and validation") {
  PeripheryCatalog c;
  CHECK(c.dac(4).power_10mhz == doctest::Approx(3.2e-6));
  CHECK(c.adc(8).area_um2 == doctest::Approx(7920.0));
  CHECK_THROWS_AS(c.dac(6), Error);
  CHECK_THROWS_AS(c.adc(2), Error);
  // per-op energy identity: E_op(f) = P(f)/f, asserted against the catalog
  OpCounts one;
  one.adc_ops = 1;
  EnergyContext ctx{false, true};
  const EnergyBreakdown e10 = energy_estimate(one, c, Frequency::mhz10, 4, 4, ctx);
  const EnergyBreakdown e100 = energy_estimate(one, c, Frequency::mhz100, 4, 4, ctx);
  CHECK(e10.adc == doctest::Approx(c.adc4.power_10mhz / 10e6).epsilon(1e-12));
  CHECK(e100.adc == doctest::Approx(c.adc4.power_100mhz / 100e6).epsilon(1e-12));
}

TEST_CASE("count_ops: dense layer formulas") {
  NetworkGraph net = build_dense_net(900, {145}, 12, 1);
  // hidden dense 900x145 + output 145x12
  Polarity uni{PolarityMode::unipolar, 0.0};
  OpCounts oc = count_ops(net, uni);
  // hidden layer alone: 130,500 reads, 900 dac, 145 adc
  CHECK(oc.nvm_reads_pos == 900 * 145 + 145 * 12);
  CHECK(oc.dac_ops == 900 + 145);
  CHECK(oc.adc_ops == 145 + 12);
  // the output layer keeps its own (bipolar) polarity
  CHECK(oc.nvm_reads_neg == 145 * 12);

  Polarity bip{PolarityMode::bipolar, 0.0};
  OpCounts ob = count_ops(net, bip);
  CHECK(ob.nvm_reads_neg == ob.nvm_reads_pos);  // doubled reads
  CHECK(ob.nvm_total() == 2 * oc.nvm_reads_pos);
}

TEST_CASE("count_ops: toy conv matches brute-force MAC enumeration") {
  NetworkGraph net;
  net.input_shape = {4, 4, 1};
  net.num_classes = 2;
  LayerSpec conv;
  conv.kind = LayerKind::conv2d;
  conv.name = "conv1";
  conv.kh = conv.kw = 2;
  conv.in_dim = 1;
  conv.out_dim = 1;
  conv.pad = Padding::valid;
  net.layers.push_back(conv);
  LayerSpec act;
  act.kind = LayerKind::activation;
  act.name = "conv1.act";
  net.layers.push_back(act);
  LayerSpec fl;
  fl.kind = LayerKind::flatten;
  fl.name = "flatten";
  net.layers.push_back(fl);
  LayerSpec o;
  o.kind = LayerKind::output;
  o.name = "out";
  o.in_dim = 9;
  o.out_dim = 2;
  net.layers.push_back(o);
  net.params["conv1.w"] = Tensor({2, 2, 1, 1});
  net.params["conv1.b"] = Tensor({1});
  net.params["out.w"] = Tensor({9, 2});
  net.params["out.b"] = Tensor({2});
  net.layers.back().binding = QuantBinding::output;
  net.layer_ranges.assign(net.layers.size(), LayerRanges{});
  net.validate();

  Polarity uni{PolarityMode::unipolar, 0.0};
  OpCounts oc = count_ops(net, uni);
  // conv: F*K*positions = 1*4*9 = 36 reads
  CHECK(oc.nvm_reads_pos - 18 == 36);  // minus the 9x2 output layer
  CHECK(oc.nvm_reads_pos == oracle::enumerate_macs(net));
  CHECK(oc.dac_ops == oracle::enumerate_inputs(net));
  CHECK(oc.adc_ops == oracle::enumerate_outputs(net));
}

TEST_CASE("count_ops equals brute-force enumeration on random architectures") {
  std::mt19937_64 rng(55);
  for (int trial = 0; trial < 50; ++trial) {
    NetworkGraph net;
    const bool with_conv = rng() % 2;
    if (with_conv) {
      const int hw = 6 + static_cast<int>(rng() % 6);
      const int c = 1 + static_cast<int>(rng() % 3);
      const int f = 1 + static_cast<int>(rng() % 5);
      net.input_shape = {hw, hw, c};
      net.num_classes = 2 + static_cast<int>(rng() % 5);
      LayerSpec conv;
      conv.kind = LayerKind::conv2d;
      conv.name = "conv1";
      conv.kh = 1 + static_cast<int>(rng() % 3);
      conv.kw = 1 + static_cast<int>(rng() % 3);
      conv.stride = 1 + static_cast<int>(rng() % 2);
      conv.pad = (rng() % 2) ? Padding::same : Padding::valid;
      conv.in_dim = c;
      conv.out_dim = f;
      net.layers.push_back(conv);
      LayerSpec act;
      act.kind = LayerKind::activation;
      act.name = "a1";
      net.layers.push_back(act);
      LayerSpec fl;
      fl.kind = LayerKind::flatten;
      fl.name = "fl";
      net.layers.push_back(fl);
      const auto geomv = [&] {
        // temporary output layer to make validate() pass during geometry walk
        return 0;
      }();
      (void)geomv;
      int oh, ow, pt, pl;
      conv_output_geometry(hw, hw, conv.kh, conv.kw, conv.stride, conv.pad, &oh, &ow, &pt, &pl);
      LayerSpec o;
      o.kind = LayerKind::output;
      o.name = "out";
      o.in_dim = oh * ow * f;
      o.out_dim = net.num_classes;
      net.layers.push_back(o);
      net.params["conv1.w"] = Tensor({conv.kh, conv.kw, c, f});
      net.params["conv1.b"] = Tensor({f});
      net.params["out.w"] = Tensor({o.in_dim, o.out_dim});
      net.params["out.b"] = Tensor({o.out_dim});
      net.layers.back().binding = QuantBinding::output;
      net.layer_ranges.assign(net.layers.size(), LayerRanges{});
      net.validate();
    } else {
      const int in = 3 + static_cast<int>(rng() % 20);
      std::vector<int> hidden;
      for (int i = static_cast<int>(rng() % 3); i > 0; --i)
        hidden.push_back(2 + static_cast<int>(rng() % 12));
      net = build_dense_net(in, hidden, 2 + static_cast<int>(rng() % 6), rng());
    }
    OpCounts oc = count_ops(net, Polarity{PolarityMode::unipolar, 0.0});
    CHECK(oc.nvm_reads_pos == oracle::enumerate_macs(net));
    CHECK(oc.dac_ops == oracle::enumerate_inputs(net));
    CHECK(oc.adc_ops == oracle::enumerate_outputs(net));
  }
}

TEST_CASE("fractional polarity scales the doubled read share by 1-p") {
  NetworkGraph net = build_dense_net(100, {100}, 2, 1);
  // Only the hidden layer follows the override; use its reads in isolation.
  OpCounts bip = count_ops(net, Polarity{PolarityMode::bipolar, 0.0});
  OpCounts half = count_ops(net, Polarity{PolarityMode::fractional, 0.5});
  OpCounts full = count_ops(net, Polarity{PolarityMode::unipolar, 0.0});
  const int64_t hidden_macs = 100 * 100;
  CHECK(bip.nvm_reads_neg - half.nvm_reads_neg == hidden_macs / 2);
  CHECK(bip.nvm_reads_neg - full.nvm_reads_neg == hidden_macs);
  // exactly -25% crossbar reads at p = 0.5 for the hidden layer
  const int64_t out_macs = 2 * 100;
  const double bip_reads = static_cast<double>(bip.nvm_total() - 2 * out_macs);
  const double half_reads = static_cast<double>(half.nvm_total() - 2 * out_macs);
  CHECK(half_reads / bip_reads == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("area golden rows: Table IV traditional and proposed HAR") {
  // CIFAR10 TF 8-bit: 8.05 mm^2 (2%)
  check_printed(report_for("cifar10-tf-8b").area.total_mm2(), 8.05, 0.02, 0.01);
  // CIFAR10 TF 4-bit: 1.1 mm^2 (2%)
  check_printed(report_for("cifar10-tf-4b").area.total_mm2(), 1.1, 0.02, 0.1);
  // HAR TF 8-bit: 2.51 mm^2 (3%)
  check_printed(report_for("har-tf-8b").area.total_mm2(), 2.51, 0.03, 0.01);
  // HAR TF 4-bit: 0.35 mm^2 (3%)
  check_printed(report_for("har-tf-4b").area.total_mm2(), 0.35, 0.03, 0.01);
  // HAR proposed 4-bit: 0.28 mm^2 (3%)
  check_printed(report_for("har-ours-4b").area.total_mm2(), 0.28, 0.03, 0.01);
}

TEST_CASE("area example: explicit counts reproduce the hand total") {
  ComponentCounts c{44, 448, 896, 896, 8, 8, 128, 128};
  const AreaBreakdown a = area_estimate(c, PeripheryCatalog{});
  // 44*128*128*0.075um^2 + 448*440 + 896*7920 + 896*792, summed in mm^2
  CHECK(a.crossbars_mm2 == doctest::Approx(44 * 16384 * 0.075 * 1e-6).epsilon(1e-12));
  CHECK(a.total_mm2() == doctest::Approx(8.0566).epsilon(1e-3));
}

TEST_CASE("energy golden rows: Table III NVM and DAC") {
  const CostReport c8 = report_for("cifar10-tf-8b");
  // NVM rows: 1.55 uJ / 0.16 uJ at 5%
  check_printed(c8.energy_10mhz.nvm_pos + c8.energy_10mhz.nvm_neg, 1.55e-6, 0.05, 0.01e-6);
  check_printed(c8.energy_100mhz.nvm_pos + c8.energy_100mhz.nvm_neg, 0.16e-6, 0.05, 0.01e-6);
  // DAC rows: 32.9 / 10.1 nJ at 5%
  check_printed(c8.energy_10mhz.dac, 32.9e-9, 0.05, 0.1e-9);
  check_printed(c8.energy_100mhz.dac, 10.1e-9, 0.05, 0.1e-9);
  const CostReport c4 = report_for("cifar10-tf-4b");
  check_printed(c4.energy_10mhz.dac, 23.9e-9, 0.05, 0.1e-9);
  check_printed(c4.energy_100mhz.dac, 8.7e-9, 0.05, 0.1e-9);
  // ADC rows only within 25% (documented catalog inconsistency)
  check_printed(c8.energy_10mhz.adc, 22.6e-9, 0.25, 0.1e-9);
  check_printed(c8.energy_100mhz.adc, 22.6e-9, 0.25, 0.1e-9);
  check_printed(c4.energy_10mhz.adc, 18.4e-9, 0.25, 0.1e-9);

  const CostReport h8 = report_for("har-tf-8b");
  check_printed(h8.energy_10mhz.nvm_pos, 0.7e-9, 0.05, 0.1e-9);
  check_printed(h8.energy_100mhz.nvm_pos, 0.07e-9, 0.05, 0.01e-9);
  check_printed(h8.energy_10mhz.dac, 0.17e-9, 0.05, 0.01e-9);
  check_printed(h8.energy_100mhz.dac, 0.05e-9, 0.05, 0.01e-9);
  const CostReport h4 = report_for("har-tf-4b");
  check_printed(h4.energy_10mhz.dac, 0.12e-9, 0.05, 0.01e-9);
  check_printed(h4.energy_100mhz.dac, 0.04e-9, 0.05, 0.01e-9);
  check_printed(h4.energy_10mhz.adc, 0.04e-9, 0.25, 0.01e-9);

  // HAR proposed: unipolar kills the negative-column reads exactly.
  const CostReport ho = report_for("har-ours-4b");
  CHECK(ho.counts.nvm_reads_neg == 0);
  CHECK(ho.energy_10mhz.nvm_neg == 0.0);
  CHECK(ho.energy_100mhz.nvm_neg == 0.0);
}

TEST_CASE("energy golden: HAR proposed needs under 60% of the TF-8b energy") {
  const CostReport base = report_for("har-tf-8b");
  const CostReport ours = report_for("har-ours-4b");
  const SavingsReport s = savings_report(base, ours);
  CHECK(s.energy_saving_10mhz >= 0.40);
  CHECK(s.energy_ratio_10mhz <= 0.60);  // the published claim is ~55%
}

TEST_CASE("area savings: proposed 4-bit CIFAR10 vs traditional 4-bit") {
  const CostReport base = report_for("cifar10-tf-4b");
  // The area-consistent reading of the published proposed row.
  const CostReport ours = report_for("cifar10-ours-4b-128adc");
  const SavingsReport s = savings_report(base, ours);
  CHECK(s.area_saving >= 0.78);
  // The as-printed row (256 ADCs) is reported with its note, not resolved.
  const CostReport printed = report_for("cifar10-ours-4b");
  CHECK(row("cifar10-ours-4b").note.find("256 ADCs") != std::string::npos);
  CHECK(printed.area.total_mm2() > ours.area.total_mm2());
}

TEST_CASE("savings: identical reports give ratio 1 and zero saving") {
  const CostReport a = report_for("har-tf-4b");
  const SavingsReport s = savings_report(a, a);
  CHECK(s.area_ratio == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.energy_saving_10mhz == doctest::Approx(0.0).epsilon(1e-12));
  CostReport zero;
  CHECK_THROWS_AS(savings_report(zero, a), Error);
}

TEST_CASE("unipolar halves the NVM read energy of identical bipolar nets") {
  NetworkGraph net = build_dense_net(64, {32}, 4, 2);
  for (auto& l : net.layers)
    if (l.trainable()) l.polarity.mode = PolarityMode::bipolar;
  net.layers.back().polarity.mode = PolarityMode::bipolar;
  OpCounts bip = count_ops(net);
  for (auto& l : net.layers)
    if (l.trainable()) l.polarity.mode = PolarityMode::unipolar;
  OpCounts uni = count_ops(net);
  PeripheryCatalog cat;
  EnergyContext ctx{true, true};
  const double e_b = energy_estimate(bip, cat, Frequency::mhz10, 4, 4, ctx).nvm_pos +
                     energy_estimate(bip, cat, Frequency::mhz10, 4, 4, ctx).nvm_neg;
  const double e_u = energy_estimate(uni, cat, Frequency::mhz10, 4, 4, ctx).nvm_pos;
  CHECK(e_u / e_b == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("totals are exact sums of their parts") {
  const CostReport r = report_for("cifar10-tf-8b");
  CHECK(r.area.total_mm2() ==
        r.area.crossbars_mm2 + r.area.dac_mm2 + r.area.adc_mm2 + r.area.subtractor_mm2);
  CHECK(r.energy_10mhz.total() == r.energy_10mhz.nvm_pos + r.energy_10mhz.nvm_neg +
                                      r.energy_10mhz.dac + r.energy_10mhz.adc);
}

TEST_CASE("report serialization carries the numbers and notes") {
  CostReport r = report_for("cifar10-ours-4b");
  r.notes.push_back("extra note");
  const std::string j = report_to_json(r);
  CHECK(j.find("total_mm2") != std::string::npos);
  CHECK(j.find("extra note") != std::string::npos);
  const std::string t = report_to_text(r);
  CHECK(t.find("reconfigurable: yes") != std::string::npos);
  CHECK(t.find("NVM (+)") != std::string::npos);
}

TEST_CASE("catalog JSON override round-trips") {
  PeripheryCatalog c;
  c.dac4.power_10mhz = 5.5e-6;
  c.subtractor_area_frac = 0.12;
  const std::string j = catalog_to_json(c);
  PeripheryCatalog back = catalog_from_json(j);
  CHECK(back.dac4.power_10mhz == 5.5e-6);
  CHECK(back.subtractor_area_frac == 0.12);
  CHECK_THROWS_AS(catalog_from_json("{"), Error);
}
