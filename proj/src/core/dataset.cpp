#include "core/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace xbt {

void Dataset::validate() const {
  require(static_cast<int>(labels.size()) == size(), ErrorCode::argument,
          "label count does not match sample count");
  for (int l : labels)
    require(l >= 0 && l < classes, ErrorCode::argument, "label out of range");
  std::set<int> seen;
  for (const auto* split : {&train_idx, &val_idx, &test_idx})
    for (int i : *split) {
      require(i >= 0 && i < size(), ErrorCode::argument, "split index out of range");
      require(seen.insert(i).second, ErrorCode::argument, "splits are not disjoint");
    }
}

Tensor Dataset::gather(const std::vector<int>& idx, int begin, int count,
                       std::vector<int>* labels_out) const {
  require(begin >= 0 && begin + count <= static_cast<int>(idx.size()), ErrorCode::argument,
          "batch range out of bounds");
  const int64_t stride = samples.size() / size();
  Shape shape = samples.shape();
  shape[0] = count;
  Tensor out(shape);
  if (labels_out) labels_out->resize(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    const int src = idx[static_cast<size_t>(begin + i)];
    std::copy_n(samples.data() + stride * src, stride, out.data() + stride * i);
    if (labels_out) (*labels_out)[static_cast<size_t>(i)] = labels[static_cast<size_t>(src)];
  }
  return out;
}

namespace {

constexpr int kCifarRecord = 3073;  // 1 label byte + 32*32*3 pixels

void read_cifar_file(const std::string& path, std::vector<double>& pixels, std::vector<int>& labels) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), ErrorCode::io, "cannot open " + path);
  f.seekg(0, std::ios::end);
  const int64_t size = f.tellg();
  f.seekg(0);
  if (size % kCifarRecord != 0) {
    const int64_t offset = (size / kCifarRecord) * kCifarRecord;
    raise(ErrorCode::format, path + ": malformed record at byte offset " + std::to_string(offset) +
                                 " (file size " + std::to_string(size) + " is not a multiple of 3073)");
  }
  const int64_t n = size / kCifarRecord;
  std::vector<unsigned char> buf(static_cast<size_t>(size));
  f.read(reinterpret_cast<char*>(buf.data()), size);
  require(f.good(), ErrorCode::io, "short read on " + path);
  for (int64_t i = 0; i < n; ++i) {
    const unsigned char* rec = buf.data() + i * kCifarRecord;
    labels.push_back(static_cast<int>(rec[0]));
    // Planes are stored R,G,B each row-major; emit NHWC.
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x)
        for (int c = 0; c < 3; ++c)
          pixels.push_back(static_cast<double>(rec[1 + c * 1024 + y * 32 + x]) / 255.0);
  }
}

}  // namespace

Dataset load_cifar10(const std::string& dir, int max_train, int max_test) {
  namespace fs = std::filesystem;
  std::vector<double> pixels;
  std::vector<int> labels;
  int train_n = 0;
  for (int b = 1; b <= 5; ++b) {
    const std::string path = dir + "/data_batch_" + std::to_string(b) + ".bin";
    if (!fs::exists(path)) continue;
    read_cifar_file(path, pixels, labels);
  }
  train_n = static_cast<int>(labels.size());
  require(train_n > 0, ErrorCode::io, "no data_batch_*.bin files under " + dir);
  const std::string test_path = dir + "/test_batch.bin";
  if (fs::exists(test_path)) read_cifar_file(test_path, pixels, labels);
  const int total = static_cast<int>(labels.size());

  Dataset ds;
  ds.samples = Tensor({total, 32, 32, 3}, std::move(pixels));
  ds.labels = std::move(labels);
  ds.classes = 10;
  ds.normalization = "pixels/255";
  const int use_train = max_train > 0 ? std::min(max_train, train_n) : train_n;
  // Hold out a tenth of the train subset for validation.
  const int val_n = std::max(use_train / 10, 1);
  for (int i = 0; i < use_train - val_n; ++i) ds.train_idx.push_back(i);
  for (int i = use_train - val_n; i < use_train; ++i) ds.val_idx.push_back(i);
  const int test_total = total - train_n;
  const int use_test = max_test > 0 ? std::min(max_test, test_total) : test_total;
  for (int i = 0; i < use_test; ++i) ds.test_idx.push_back(train_n + i);
  ds.validate();
  return ds;
}

Dataset load_har_csv(const std::string& path, int window, int stride) {
  require(window > 0 && stride > 0, ErrorCode::argument, "window and stride must be positive");
  std::ifstream f(path);
  require(f.good(), ErrorCode::io, "cannot open " + path);

  std::vector<std::array<double, 9>> rows;
  std::vector<int> rowlab;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::array<double, 9> vals{};
    int col = 0;
    int label = -1;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0') {
        raise(ErrorCode::format, path + ": non-numeric cell at row " + std::to_string(lineno) +
                                     ", column " + std::to_string(col + 1));
      }
      if (col < 9) vals[static_cast<size_t>(col)] = v;
      else if (col == 9) label = static_cast<int>(v);
      ++col;
    }
    require(col == 10, ErrorCode::format,
            path + ": row " + std::to_string(lineno) + " has " + std::to_string(col) +
                " columns, expected 10");
    rows.push_back(vals);
    rowlab.push_back(label);
  }
  require(static_cast<int>(rows.size()) >= window, ErrorCode::format,
          path + ": fewer rows than one window");

  int classes = 0;
  for (int l : rowlab) classes = std::max(classes, l + 1);

  const int n = (static_cast<int>(rows.size()) - window) / stride + 1;
  Tensor samples({n, 9, window});
  std::vector<int> labels(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int start = i * stride;
    std::map<int, int> votes;
    for (int t = 0; t < window; ++t) {
      for (int c = 0; c < 9; ++c)
        samples[(static_cast<int64_t>(i) * 9 + c) * window + t] =
            rows[static_cast<size_t>(start + t)][static_cast<size_t>(c)];
      votes[rowlab[static_cast<size_t>(start + t)]]++;
    }
    int best = -1, bestn = -1;
    for (auto [lab, cnt] : votes)
      if (cnt > bestn) {
        best = lab;
        bestn = cnt;
      }
    labels[static_cast<size_t>(i)] = best;
  }

  Dataset ds;
  ds.samples = std::move(samples);
  ds.labels = std::move(labels);
  ds.classes = classes;
  // Chronological 80/20 split (the row stream carries no subject ids).
  const int train_n = std::max((n * 8) / 10, 1);
  for (int i = 0; i < train_n; ++i) ds.train_idx.push_back(i);
  for (int i = train_n; i < n; ++i) ds.val_idx.push_back(i);

  // Per-channel z-normalization from train-split statistics.
  for (int c = 0; c < 9; ++c) {
    double sum = 0.0, sq = 0.0;
    int64_t cnt = 0;
    for (int i : ds.train_idx)
      for (int t = 0; t < window; ++t) {
        const double v = ds.samples[(static_cast<int64_t>(i) * 9 + c) * window + t];
        sum += v;
        sq += v * v;
        ++cnt;
      }
    const double mean = sum / static_cast<double>(cnt);
    double var = sq / static_cast<double>(cnt) - mean * mean;
    const double sd = std::sqrt(std::max(var, 0.0));
    const double inv = 1.0 / std::max(sd, 1e-12);
    for (int i = 0; i < n; ++i)
      for (int t = 0; t < window; ++t) {
        double& v = ds.samples[(static_cast<int64_t>(i) * 9 + c) * window + t];
        v = (v - mean) * (sd < 1e-12 ? 0.0 : inv);
      }
  }
  ds.normalization = "per-channel z-score (train split)";
  ds.validate();
  return ds;
}

Dataset synth_har(uint64_t seed, int n, int classes, double noise) {
  require(classes >= 2, ErrorCode::argument, "need at least two classes");
  require(n >= classes, ErrorCode::argument, "need at least one sample per class");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Dataset ds;
  ds.samples = Tensor({n, 9, 100});
  ds.labels.resize(static_cast<size_t>(n));
  ds.classes = classes;
  for (int i = 0; i < n; ++i) {
    const int c = i % classes;  // round-robin keeps priors uniform within one sample
    ds.labels[static_cast<size_t>(i)] = c;
    for (int ch = 0; ch < 9; ++ch) {
      const double amp = 0.6 + 0.4 * static_cast<double>((3 * c + 5 * ch) % 7) / 6.0;
      const double phase = 2.0 * M_PI * static_cast<double>((2 * c + 3 * ch) % 8) / 8.0;
      const double freq = static_cast<double>(c + 1);
      for (int t = 0; t < 100; ++t) {
        const double s = amp * std::sin(2.0 * M_PI * freq * t / 100.0 + phase);
        ds.samples[(static_cast<int64_t>(i) * 9 + ch) * 100 + t] = s + noise * gauss(rng);
      }
    }
  }
  // Stratified 80/20: every fifth sample validates.
  for (int i = 0; i < n; ++i) (i % 5 == 4 ? ds.val_idx : ds.train_idx).push_back(i);
  ds.normalization = "none (generator emits unit-scale signals)";
  ds.validate();
  return ds;
}

Dataset synth_images(uint64_t seed, int n, int classes, double noise) {
  require(classes >= 2, ErrorCode::argument, "need at least two classes");
  require(n >= classes, ErrorCode::argument, "need at least one sample per class");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 2.0 * M_PI);

  Dataset ds;
  ds.samples = Tensor({n, 32, 32, 3});
  ds.labels.resize(static_cast<size_t>(n));
  ds.classes = classes;
  for (int i = 0; i < n; ++i) {
    const int c = i % classes;
    ds.labels[static_cast<size_t>(i)] = c;
    const double theta = M_PI * static_cast<double>(c) / static_cast<double>(classes);
    const double freq = 2.0 + static_cast<double>(c % 3);
    const double phase = uni(rng);
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) {
        const double u = (x * std::cos(theta) + y * std::sin(theta)) / 32.0;
        const double g = std::sin(2.0 * M_PI * freq * u + phase);
        for (int ch = 0; ch < 3; ++ch) {
          const double amp = 0.25 + 0.25 * static_cast<double>((c + ch) % 3);
          double v = 0.5 + amp * g * 0.5 + noise * gauss(rng);
          ds.samples[((static_cast<int64_t>(i) * 32 + y) * 32 + x) * 3 + ch] =
              std::clamp(v, 0.0, 1.0);
        }
      }
  }
  for (int i = 0; i < n; ++i) (i % 5 == 4 ? ds.val_idx : ds.train_idx).push_back(i);
  ds.normalization = "pixels in [0,1]";
  ds.validate();
  return ds;
}

}  // namespace xbt
