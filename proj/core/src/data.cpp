#include "cmtn/data.hpp"

#include <cmath>
#include <sstream>

#include "cmtn/textio.hpp"

namespace cmtn {

int DomainDataset::window() const {
    if (samples.empty()) throw DataError("dataset is empty");
    return samples.front().x.dim(0);
}

int DomainDataset::sensors() const {
    if (samples.empty()) throw DataError("dataset is empty");
    return samples.front().x.dim(1);
}

void DomainDataset::validate() const {
    const int n = window(), m = sensors();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const TimeSeriesSample& s = samples[i];
        if (s.x.rank() != 2 || s.x.dim(0) != n || s.x.dim(1) != m)
            throw DataError("sample " + std::to_string(i) + " has shape " +
                            shape_string(s.x.shape()) + ", expected [" + std::to_string(n) +
                            " x " + std::to_string(m) + "]");
        if (s.domain != domain)
            throw DataError("sample " + std::to_string(i) + " carries a foreign domain tag");
        if (!std::isfinite(s.label)) throw DataError("sample " + std::to_string(i) + " label is not finite");
        for (double v : s.x.values())
            if (!std::isfinite(v))
                throw DataError("sample " + std::to_string(i) + " contains a non-finite reading");
    }
}

void write_dataset_csv(const std::string& path, const DomainDataset& ds) {
    ds.validate();
    const int n = ds.window(), m = ds.sensors();
    std::ostringstream out;
    out << "series_id,step";
    for (int k = 1; k <= m; ++k) out << ",sensor_" << k;
    out << ",label,domain\n";
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const TimeSeriesSample& s = ds.samples[i];
        const auto& v = s.x.values();
        for (int tstep = 0; tstep < n; ++tstep) {
            out << i << ',' << tstep;
            for (int k = 0; k < m; ++k)
                out << ',' << format_double(v[static_cast<std::size_t>(tstep) * m + k]);
            out << ',' << format_double(s.label) << ',' << domain_label(s.domain) << '\n';
        }
    }
    atomic_write_text(path, out.str());
}

DomainDataset read_dataset_csv(const std::string& path) {
    const std::string text = read_text_file(path);
    std::vector<std::string> lines = split(text, '\n');
    if (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.empty()) throw DataError(path + ": empty dataset file");

    const std::vector<std::string> header = split(lines.front(), ',');
    if (header.size() < 5 || header[0] != "series_id" || header[1] != "step" ||
        header[header.size() - 2] != "label" || header.back() != "domain")
        throw DataError(path + ": unexpected header '" + lines.front() + "'");
    const int m = static_cast<int>(header.size()) - 4;
    for (int k = 0; k < m; ++k)
        if (header[static_cast<std::size_t>(k + 2)] != "sensor_" + std::to_string(k + 1))
            throw DataError(path + ": expected column sensor_" + std::to_string(k + 1) + ", got '" +
                            header[static_cast<std::size_t>(k + 2)] + "'");

    DomainDataset ds;
    bool domain_set = false;
    long long current_id = -1;
    std::vector<double> rows;
    double label = 0.0;
    long long expect_step = 0;

    auto flush_series = [&]() {
        if (current_id < 0) return;
        const int n = static_cast<int>(rows.size()) / m;
        TimeSeriesSample s;
        s.x = Tensor({n, m}, rows);
        s.label = label;
        s.label_class = static_cast<int>(std::llround(label));
        s.domain = ds.domain;
        ds.samples.push_back(std::move(s));
        rows.clear();
    };

    for (std::size_t li = 1; li < lines.size(); ++li) {
        const std::string& line = lines[li];
        if (trim(line).empty()) continue;
        const std::string where = path + " line " + std::to_string(li + 1);
        const std::vector<std::string> cols = split(line, ',');
        if (static_cast<int>(cols.size()) != m + 4)
            throw DataError(where + ": expected " + std::to_string(m + 4) + " columns, got " +
                            std::to_string(cols.size()));
        const long long id = parse_integer(cols[0], where + " series_id");
        const long long step = parse_integer(cols[1], where + " step");
        const double row_label = parse_double(cols[cols.size() - 2], where + " label");
        const long long dom = parse_integer(cols.back(), where + " domain");
        if (dom != 0 && dom != 1) throw DataError(where + ": domain must be 0 or 1");
        const DomainTag tag = dom == 0 ? DomainTag::Source : DomainTag::Target;
        if (!domain_set) {
            ds.domain = tag;
            domain_set = true;
        } else if (tag != ds.domain) {
            throw DataError(where + ": mixed domain ids in one dataset file");
        }

        if (id != current_id) {
            if (id != current_id + 1)
                throw DataError(where + ": series_id jumps from " + std::to_string(current_id) +
                                " to " + std::to_string(id));
            flush_series();
            current_id = id;
            expect_step = 0;
            label = row_label;
        }
        if (step != expect_step)
            throw DataError(where + ": expected step " + std::to_string(expect_step) + ", got " +
                            std::to_string(step));
        if (row_label != label) throw DataError(where + ": label changes within a series");
        ++expect_step;
        for (int k = 0; k < m; ++k)
            rows.push_back(parse_double(cols[static_cast<std::size_t>(k + 2)],
                                        where + " sensor_" + std::to_string(k + 1)));
    }
    flush_series();
    if (ds.samples.empty()) throw DataError(path + ": no data rows");
    ds.validate();
    const int n = ds.window();
    for (const TimeSeriesSample& s : ds.samples)
        if (s.x.dim(0) != n) throw DataError(path + ": series lengths differ");
    return ds;
}

} // namespace cmtn
