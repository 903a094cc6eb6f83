#ifndef MMRA_PARAM_IO_HPP
#define MMRA_PARAM_IO_HPP

// Text parameter files.
//
//   mmra-params 1
//   meta <key> <value...>            (zero or more, value runs to end of line)
//   stack <name> <layer_count>
//   layer <relu|linear> <out_dim> <in_dim>
//   W <out_dim*in_dim numbers, row-major>
//   b <out_dim numbers>
//   ...
//   end
//
// Numbers use the shortest representation that round-trips exactly, so
// save -> load reproduces every parameter bit for bit.

#include "mmra/numerics.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace mmra {

inline constexpr int kParamFormatVersion = 1;

struct ParamFile {
    std::map<std::string, std::string> meta;
    std::vector<std::pair<std::string, Stack>> stacks;

    const Stack& stack(const std::string& name) const;
};

void write_params(std::ostream& out, const ParamFile& file);
ParamFile read_params(std::istream& in);

void save_params(const std::filesystem::path& path, const ParamFile& file);
ParamFile load_params(const std::filesystem::path& path);

std::string format_double(double v);

}  // namespace mmra

#endif
