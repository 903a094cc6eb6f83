#ifndef MMRA_COMMON_HPP
#define MMRA_COMMON_HPP

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mmra {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// The three feature views of a sample. The numeric value is the block
/// position inside a fused vector.
enum class Modality : int { Static = 0, Dynamic = 1, Network = 2 };

inline constexpr std::array<Modality, 3> kModalities{Modality::Static, Modality::Dynamic,
                                                      Modality::Network};

inline constexpr int index_of(Modality m) { return static_cast<int>(m); }

std::string_view to_string(Modality m);
Modality modality_from_string(std::string_view name);

// Error categories. The CLI maps each one to its own exit code.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct DataError : Error {
    using Error::Error;
};
struct ShapeError : Error {
    using Error::Error;
};
struct NumericError : Error {
    NumericError(const std::string& what, int layer_index = -1)
        : Error(what), layer(layer_index) {}
    int layer;
};

}  // namespace mmra

#endif
