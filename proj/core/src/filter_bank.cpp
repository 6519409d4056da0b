#include "bmwf/filter_bank.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "bmwf/error.hpp"
#include "csv_util.hpp"

namespace bmwf {

FilterBank::FilterBank(int num_mics, int num_bins)
    : num_mics_(num_mics),
      left_(num_bins, CVector::Zero(num_mics)),
      right_(num_bins, CVector::Zero(num_mics)) {
  if (num_mics < 1 || num_bins < 1) throw InvalidArgument("FilterBank: empty dimensions");
}

FilterBank FilterBank::selection(int num_mics, int num_bins, int ref_left, int ref_right) {
  if (ref_left < 0 || ref_left >= num_mics || ref_right < 0 || ref_right >= num_mics) {
    throw InvalidArgument("FilterBank::selection: reference mic out of range");
  }
  FilterBank q(num_mics, num_bins);
  for (int k = 0; k < num_bins; ++k) {
    q.left_[k](ref_left) = 1.0;
    q.right_[k](ref_right) = 1.0;
  }
  return q;
}

double FilterBank::norm() const {
  double s = 0.0;
  for (std::size_t k = 0; k < left_.size(); ++k) {
    s += left_[k].squaredNorm() + right_[k].squaredNorm();
  }
  return std::sqrt(s);
}

bool FilterBank::all_finite() const {
  for (std::size_t k = 0; k < left_.size(); ++k) {
    if (!left_[k].allFinite() || !right_[k].allFinite()) return false;
  }
  return true;
}

FilterBank FilterBank::scaled(double c) const {
  FilterBank out = *this;
  for (std::size_t k = 0; k < left_.size(); ++k) {
    out.left_[k] *= c;
    out.right_[k] *= c;
  }
  return out;
}

double relative_difference(const FilterBank& a, const FilterBank& b) {
  if (a.num_bins() != b.num_bins() || a.num_mics() != b.num_mics()) {
    throw InvalidArgument("relative_difference: dimension mismatch");
  }
  double num = 0.0;
  for (int k = 0; k < a.num_bins(); ++k) {
    num += (a.left(k) - b.left(k)).squaredNorm() + (a.right(k) - b.right(k)).squaredNorm();
  }
  const double den = b.norm();
  return den > 0.0 ? std::sqrt(num) / den : std::sqrt(num);
}

void write_filter_csv(std::ostream& os, const FilterBank& w) {
  os << "k,side,m,re,im\n";
  for (int k = 0; k < w.num_bins(); ++k) {
    for (Side s : {Side::kLeft, Side::kRight}) {
      const CVector& v = w.side(s, k);
      for (int m = 0; m < w.num_mics(); ++m) {
        os << k << ',' << (s == Side::kLeft ? 'L' : 'R') << ',' << m << ','
           << csv::format_double(v(m).real()) << ',' << csv::format_double(v(m).imag()) << '\n';
      }
    }
  }
}

FilterBank read_filter_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || csv::trim(line) != "k,side,m,re,im") {
    throw IoError("filter CSV: missing header 'k,side,m,re,im'");
  }
  std::map<std::tuple<int, int, int>, cplx> entries;
  int max_k = -1;
  int max_m = -1;
  while (std::getline(is, line)) {
    if (csv::trim(line).empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != 5) throw IoError("filter CSV: expected 5 fields: " + line);
    const int k = csv::parse_int(f[0]);
    const int s = f[1] == "L" ? 0 : (f[1] == "R" ? 1 : -1);
    const int m = csv::parse_int(f[2]);
    if (s < 0 || k < 0 || m < 0) throw IoError("filter CSV: bad row: " + line);
    entries[{k, s, m}] = cplx(csv::parse_double(f[3]), csv::parse_double(f[4]));
    max_k = std::max(max_k, k);
    max_m = std::max(max_m, m);
  }
  if (max_k < 0) throw IoError("filter CSV: no rows");
  const int bins = max_k + 1;
  const int mics = max_m + 1;
  if (entries.size() != static_cast<std::size_t>(bins) * 2 * mics) {
    throw IoError("filter CSV: incomplete filter bank");
  }
  FilterBank w(mics, bins);
  for (const auto& [key, value] : entries) {
    const auto [k, s, m] = key;
    w.side(s == 0 ? Side::kLeft : Side::kRight, k)(m) = value;
  }
  return w;
}

void save_filter_csv(const std::string& path, const FilterBank& w) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  write_filter_csv(os, w);
  if (!os) throw IoError("write failed: " + path);
}

FilterBank load_filter_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path);
  return read_filter_csv(is);
}

}  // namespace bmwf
