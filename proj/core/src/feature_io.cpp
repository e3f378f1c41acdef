#include "unipcb/feature_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "unipcb/errors.hpp"

namespace unipcb::metrics {

Tensor load_feature_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_feature_csv: cannot open " + path);

    std::string header;
    if (!std::getline(in, header)) throw IoError("load_feature_csv: empty file " + path);
    if (!header.empty() && header.back() == '\r') header.pop_back();
    std::size_t dim = 0;
    {
        std::istringstream hs(header);
        std::string tag;
        hs >> tag;
        if (tag != "dim:" || !(hs >> dim) || dim == 0)
            throw IoError("load_feature_csv: expected 'dim: d' header in " + path);
    }

    std::vector<double> values;
    std::string line;
    std::size_t rows = 0, line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::size_t cols = 0;
        while (std::getline(ls, cell, ',')) {
            try {
                std::size_t used = 0;
                const double v = std::stod(cell, &used);
                while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
                if (used != cell.size()) throw std::invalid_argument(cell);
                values.push_back(v);
            } catch (const std::exception&) {
                throw IoError("load_feature_csv: bad value '" + cell + "' at " + path + ":" +
                              std::to_string(line_no));
            }
            ++cols;
        }
        if (cols != dim)
            throw IoError("load_feature_csv: row with " + std::to_string(cols) + " values, expected " +
                          std::to_string(dim) + " at " + path + ":" + std::to_string(line_no));
        ++rows;
    }
    if (rows == 0) throw IoError("load_feature_csv: no feature rows in " + path);
    return Tensor::from_data({rows, dim}, std::move(values));
}

void save_feature_csv(const std::string& path, const Tensor& features) {
    if (features.rank() != 2) throw DimensionError("save_feature_csv: expected (n, d) tensor");
    features.assert_finite("save_feature_csv");
    std::ofstream out(path);
    if (!out) throw IoError("save_feature_csv: cannot open " + path);
    out << "dim: " << features.dim(1) << '\n';
    char buf[40];
    for (std::size_t r = 0; r < features.dim(0); ++r) {
        for (std::size_t c = 0; c < features.dim(1); ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g", features.at2(r, c));
            if (c) out << ',';
            out << buf;
        }
        out << '\n';
    }
    if (!out) throw IoError("save_feature_csv: write failed for " + path);
}

} // namespace unipcb::metrics
