#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace cmi {

struct Dimensions {
    std::size_t dx = 1;
    std::size_t dy = 1;
    std::size_t dz = 1;

    std::size_t total() const noexcept { return dx + dy + dz; }
    bool operator==(const Dimensions&) const = default;
};

// An ordered collection of (x, y, z) triples stored column-wise: column i is
// the concatenated feature vector [x_i, y_i, z_i]. This is the layout the
// classifier consumes directly.
class Dataset {
public:
    Dataset() = default;

    // Takes ownership of a (dx+dy+dz) x n matrix. Throws InputError on a
    // row-count mismatch or any non-finite entry.
    Dataset(Dimensions dims, Eigen::MatrixXd samples);

    // Uninitialised storage for n triples; callers fill it via set().
    static Dataset with_size(Dimensions dims, std::size_t n);

    std::size_t size() const noexcept { return static_cast<std::size_t>(samples_.cols()); }
    bool empty() const noexcept { return size() == 0; }
    const Dimensions& dims() const noexcept { return dims_; }

    std::span<const double> x(std::size_t i) const { return part(i, 0, dims_.dx); }
    std::span<const double> y(std::size_t i) const { return part(i, dims_.dx, dims_.dy); }
    std::span<const double> z(std::size_t i) const { return part(i, dims_.dx + dims_.dy, dims_.dz); }
    std::span<const double> features(std::size_t i) const { return part(i, 0, dims_.total()); }

    // Writes triple i from its parts; lengths must match dims().
    void set(std::size_t i, std::span<const double> x, std::span<const double> y, std::span<const double> z);

    const Eigen::MatrixXd& matrix() const noexcept { return samples_; }

    // New dataset holding the listed triples in the listed order.
    Dataset subset(std::span<const std::size_t> indices) const;

private:
    std::span<const double> part(std::size_t i, std::size_t offset, std::size_t len) const;

    Dimensions dims_;
    Eigen::MatrixXd samples_;
};

// CSV with header x_0..x_{dx-1},y_0..,z_0.. and one row per triple.
void write_csv(std::ostream& out, const Dataset& data);
void write_csv_file(const std::string& path, const Dataset& data);

// Dimensions are inferred from the header. Throws InputError on malformed
// input (unknown columns, ragged rows, non-numeric or non-finite cells).
Dataset read_csv(std::istream& in);
Dataset read_csv_file(const std::string& path);

}  // namespace cmi
