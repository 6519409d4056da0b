#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "bmwf/linalg.hpp"

namespace bmwf {

enum class Side { kLeft = 0, kRight = 1 };

/// Per-bin binaural filter pair W(k) = [w_L(k) w_R(k)], each in C^M.
class FilterBank {
 public:
  FilterBank() = default;
  FilterBank(int num_mics, int num_bins);

  /// The selection pair Q: unit entries at the reference microphones.
  static FilterBank selection(int num_mics, int num_bins, int ref_left, int ref_right);

  int num_mics() const { return num_mics_; }
  int num_bins() const { return static_cast<int>(left_.size()); }

  CVector& left(int k) { return left_[k]; }
  const CVector& left(int k) const { return left_[k]; }
  CVector& right(int k) { return right_[k]; }
  const CVector& right(int k) const { return right_[k]; }
  CVector& side(Side s, int k) { return s == Side::kLeft ? left_[k] : right_[k]; }
  const CVector& side(Side s, int k) const { return s == Side::kLeft ? left_[k] : right_[k]; }

  /// Frobenius norm over all bins and both sides.
  double norm() const;
  bool all_finite() const;

  FilterBank scaled(double c) const;

 private:
  int num_mics_ = 0;
  std::vector<CVector> left_;
  std::vector<CVector> right_;
};

/// Relative distance ||A - B|| / ||B|| over the whole bank.
double relative_difference(const FilterBank& a, const FilterBank& b);

/// CSV with header `k,side,m,re,im`; side is L or R.
void write_filter_csv(std::ostream& os, const FilterBank& w);
FilterBank read_filter_csv(std::istream& is);
void save_filter_csv(const std::string& path, const FilterBank& w);
FilterBank load_filter_csv(const std::string& path);

}  // namespace bmwf
