#pragma once

#include "dga/error.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace dga {

inline constexpr int kFormatVersion = 1;

template <typename Derived>
std::vector<double> flatten_row_major(const Eigen::MatrixBase<Derived>& m) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(static_cast<double>(m(r, c)));
    }
    return out;
}

template <typename Derived>
std::vector<double> flatten(const Eigen::MatrixBase<Derived>& v) {
    std::vector<double> out(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = static_cast<double>(v(i));
    return out;
}

template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> unflatten_row_major(const nlohmann::json& values, Eigen::Index rows,
                                                                          Eigen::Index cols) {
    if (!values.is_array() || static_cast<Eigen::Index>(values.size()) != rows * cols) {
        throw Error(ErrorCode::ModelUnreadable, "array size does not match " + std::to_string(rows) + "x" +
                                                    std::to_string(cols));
    }
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> m(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = static_cast<Scalar>(values[k++].get<double>());
    }
    return m;
}

template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> unflatten(const nlohmann::json& values, Eigen::Index size) {
    if (!values.is_array() || static_cast<Eigen::Index>(values.size()) != size) {
        throw Error(ErrorCode::ModelUnreadable, "array size does not match " + std::to_string(size));
    }
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> v(size);
    for (Eigen::Index i = 0; i < size; ++i) v(i) = static_cast<Scalar>(values[static_cast<std::size_t>(i)].get<double>());
    return v;
}

inline void check_format(const nlohmann::json& j, const std::string& kind) {
    if (!j.is_object() || j.value("format_version", 0) != kFormatVersion) {
        throw Error(ErrorCode::ModelUnreadable, "expected format_version " + std::to_string(kFormatVersion));
    }
    if (j.value("kind", std::string()) != kind) {
        throw Error(ErrorCode::ModelUnreadable, "expected kind '" + kind + "'");
    }
}

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace dga
