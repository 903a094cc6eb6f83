#include "mmra/param_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace mmra {

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

const Stack& ParamFile::stack(const std::string& name) const {
    for (const auto& [n, s] : stacks)
        if (n == name) return s;
    throw DataError("parameter file has no stack named '" + name + "'");
}

namespace {

double parse_number(const std::string& token) {
    double v = 0.0;
    auto res = std::from_chars(token.data(), token.data() + token.size(), v);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size())
        throw DataError("parameter file: bad number '" + token + "'");
    return v;
}

void expect(std::istream& in, const std::string& word) {
    std::string got;
    if (!(in >> got) || got != word)
        throw DataError("parameter file: expected '" + word + "', found '" + got + "'");
}

}  // namespace

void write_params(std::ostream& out, const ParamFile& file) {
    out << "mmra-params " << kParamFormatVersion << '\n';
    for (const auto& [k, v] : file.meta) out << "meta " << k << ' ' << v << '\n';
    for (const auto& [name, stack] : file.stacks) {
        out << "stack " << name << ' ' << stack.size() << '\n';
        for (const auto& layer : stack) {
            out << "layer " << (layer.activation == Activation::relu ? "relu" : "linear") << ' '
                << layer.W.rows() << ' ' << layer.W.cols() << '\n';
            out << 'W';
            for (Index r = 0; r < layer.W.rows(); ++r)
                for (Index c = 0; c < layer.W.cols(); ++c) out << ' ' << format_double(layer.W(r, c));
            out << "\nb";
            for (Index r = 0; r < layer.b.size(); ++r) out << ' ' << format_double(layer.b(r));
            out << '\n';
        }
    }
    out << "end\n";
}

ParamFile read_params(std::istream& in) {
    ParamFile file;
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != "mmra-params")
        throw DataError("parameter file: missing 'mmra-params' header");
    if (version != kParamFormatVersion)
        throw DataError("parameter file: unsupported version " + std::to_string(version));
    std::string word;
    while (in >> word) {
        if (word == "end") return file;
        if (word == "meta") {
            std::string key, value;
            in >> key;
            std::getline(in, value);
            if (!value.empty() && value.front() == ' ') value.erase(0, 1);
            file.meta[key] = value;
        } else if (word == "stack") {
            std::string name;
            std::size_t count = 0;
            if (!(in >> name >> count)) throw DataError("parameter file: bad stack line");
            Stack stack;
            for (std::size_t k = 0; k < count; ++k) {
                expect(in, "layer");
                std::string act;
                Index rows = 0, cols = 0;
                if (!(in >> act >> rows >> cols) || rows < 0 || cols < 0)
                    throw DataError("parameter file: bad layer line in stack " + name);
                Layer layer;
                if (act == "relu")
                    layer.activation = Activation::relu;
                else if (act == "linear")
                    layer.activation = Activation::linear;
                else
                    throw DataError("parameter file: unknown activation '" + act + "'");
                layer.W.resize(rows, cols);
                layer.b.resize(rows);
                std::string tok;
                expect(in, "W");
                for (Index r = 0; r < rows; ++r)
                    for (Index c = 0; c < cols; ++c) {
                        if (!(in >> tok)) throw DataError("parameter file: truncated W");
                        layer.W(r, c) = parse_number(tok);
                    }
                expect(in, "b");
                for (Index r = 0; r < rows; ++r) {
                    if (!(in >> tok)) throw DataError("parameter file: truncated b");
                    layer.b(r) = parse_number(tok);
                }
                stack.push_back(std::move(layer));
            }
            check_stack_shapes(stack);
            file.stacks.emplace_back(name, std::move(stack));
        } else {
            throw DataError("parameter file: unexpected token '" + word + "'");
        }
    }
    throw DataError("parameter file: missing 'end'");
}

void save_params(const std::filesystem::path& path, const ParamFile& file) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    write_params(out, file);
}

ParamFile load_params(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    return read_params(in);
}

}  // namespace mmra
