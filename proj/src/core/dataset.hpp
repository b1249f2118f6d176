#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace xbt {

// Labeled sample store with disjoint split index lists. Normalization happens
// exactly once, at load time.
struct Dataset {
  Tensor samples;  // [N, ...]
  std::vector<int> labels;
  int classes = 0;
  std::vector<int> train_idx, val_idx, test_idx;
  std::string normalization;

  int size() const { return samples.rank() ? samples.dim(0) : 0; }
  void validate() const;

  // Gathers a batch of samples/labels by dataset indices.
  Tensor gather(const std::vector<int>& idx, int begin, int count, std::vector<int>* labels_out) const;
};

// CIFAR-10 binary batches (1 label byte + 3072 pixel bytes per record) from a
// directory holding data_batch_*.bin and test_batch.bin. Pixels scale to
// [0,1]. max_train/max_test clip the splits for desk-scale runs (0 = all).
Dataset load_cifar10(const std::string& dir, int max_train = 0, int max_test = 0);

// CSV of time steps: 9 numeric channel columns + 1 activity label column.
// Windows of `window` steps (stride `stride`) labeled by majority activity,
// z-normalized per channel with train-split statistics.
Dataset load_har_csv(const std::string& path, int window = 100, int stride = 100);

// Synthetic HAR-like stand-in: class-conditional band-limited signals on a
// 9x100 grid; same seed gives a bit-identical dataset.
Dataset synth_har(uint64_t seed, int n, int classes = 12, double noise = 0.1);

// Synthetic 32x32x3 image windows (oriented gratings per class), used where a
// real CIFAR-10 directory is not available.
Dataset synth_images(uint64_t seed, int n, int classes = 10, double noise = 0.05);

}  // namespace xbt
