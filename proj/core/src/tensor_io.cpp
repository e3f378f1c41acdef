#include "unipcb/tensor_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace unipcb {

void write_tensor(std::ostream& os, const Tensor& t) {
    os << "shape:";
    for (std::size_t d : t.shape()) os << " " << d;
    os << "\n";

    const std::size_t inner = t.rank() == 0 ? 1 : t.shape().back();
    char buf[40];
    for (std::size_t i = 0; i < t.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", t[i]);
        os << buf;
        os << (((i + 1) % inner == 0) ? "\n" : " ");
    }
}

Tensor read_tensor(std::istream& is) {
    std::string header;
    if (!std::getline(is, header)) throw IoError("tensor stream: missing shape header");
    std::istringstream hs(header);
    std::string tag;
    hs >> tag;
    if (tag != "shape:") throw IoError("tensor stream: expected 'shape:' header, got '" + tag + "'");

    std::vector<std::size_t> shape;
    std::size_t d = 0;
    while (hs >> d) shape.push_back(d);
    if (shape.empty()) throw IoError("tensor stream: empty shape");

    const std::size_t n = shape_product(shape);
    std::vector<double> data;
    data.reserve(n);
    double v = 0.0;
    while (data.size() < n && (is >> v)) data.push_back(v);
    if (data.size() != n) {
        throw IoError("tensor stream: expected " + std::to_string(n) + " values, got " +
                      std::to_string(data.size()));
    }
    return Tensor::from_data(std::move(shape), std::move(data));
}

void save_tensor(const std::string& path, const Tensor& t) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path);
    write_tensor(os, t);
    if (!os) throw IoError("write failed: " + path);
}

Tensor load_tensor(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open for reading: " + path);
    return read_tensor(is);
}

std::string tensor_to_string(const Tensor& t) {
    std::ostringstream os;
    write_tensor(os, t);
    return os.str();
}

Tensor tensor_from_string(const std::string& text) {
    std::istringstream is(text);
    return read_tensor(is);
}

} // namespace unipcb
