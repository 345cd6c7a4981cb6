#include "blowup/trajectory_io.hpp"
#include "blowup/errors.hpp"

#include <json.hpp>

#include <bit>
#include <fstream>

namespace blowup {

static_assert(std::endian::native == std::endian::little, "trajectory files are written little-endian");

namespace {

const char* kMagic = "BLOWUP-TRAJECTORY 1";

nlohmann::json matrix_json(const SymmetricMatrix& m)
{
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < m.dim(); ++i) {
        nlohmann::json r = nlohmann::json::array();
        for (int j = 0; j < m.dim(); ++j) r.push_back(m(i, j));
        rows.push_back(r);
    }
    return rows;
}

SymmetricMatrix matrix_from(const nlohmann::json& j)
{
    const int n = static_cast<int>(j.size());
    Mat m(n, n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) m(a, b) = j.at(a).at(b).get<double>();
    return SymmetricMatrix(m);
}

std::string family_name(InitialFamily f)
{
    switch (f) {
    case InitialFamily::MZ: return "mz";
    case InitialFamily::VA: return "va";
    case InitialFamily::Custom: return "custom";
    }
    return "?";
}

} // namespace

void save_trajectory(const std::string& path, const Trajectory& tr)
{
    require(tr.grid != nullptr, "save_trajectory: trajectory without grid");
    nlohmann::json h;
    h["model"] = {{"p", tr.params.p}, {"N", tr.params.N}};
    h["grid"] = {{"dim", tr.grid->dim()}, {"L", tr.grid->half_width()}, {"nodes", tr.grid->axis_size()}};
    h["stride"] = tr.stride;
    h["records"] = tr.s.size();
    h["has_fields"] = tr.has_fields();
    h["termination"] = to_string(tr.termination);
    h["end_s"] = tr.end_s;
    h["solver"] = {{"ds", tr.config.ds}, {"s_end", tr.config.s_end}, {"stride", tr.config.stride},
                   {"blowup_factor", tr.config.blowup_factor}};
    nlohmann::json init;
    init["family"] = family_name(tr.initial.family);
    init["s0"] = tr.initial.s0;
    init["d0"] = tr.initial.d0;
    init["d1"] = std::vector<double>(tr.initial.d1.data(), tr.initial.d1.data() + tr.initial.d1.size());
    init["d2"] = matrix_json(tr.initial.d2);
    h["initial"] = init;
    nlohmann::json corr = nlohmann::json::array();
    for (const auto& c : tr.corrections) corr.push_back({c.s, c.delta});
    h["corrections"] = corr;

    std::ofstream os(path, std::ios::binary);
    if (!os) throw InvalidInput("save_trajectory: cannot open " + path);
    os << kMagic << '\n' << h.dump() << '\n';
    for (std::size_t i = 0; i < tr.s.size(); ++i) {
        os.write(reinterpret_cast<const char*>(&tr.s[i]), sizeof(double));
        if (tr.has_fields())
            os.write(reinterpret_cast<const char*>(tr.fields[i].data()),
                     static_cast<std::streamsize>(sizeof(double) * tr.fields[i].size()));
    }
    if (!os) throw NumericalFault("save_trajectory: write failed for " + path);
}

Trajectory load_trajectory(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InvalidInput("load_trajectory: cannot open " + path);
    std::string magic, header;
    std::getline(is, magic);
    if (magic != kMagic) throw InvalidInput("load_trajectory: " + path + " is not a trajectory file");
    std::getline(is, header);
    const auto h = nlohmann::json::parse(header);

    Trajectory tr;
    tr.params = ModelParams::make(h["model"]["p"].get<double>(), h["model"]["N"].get<int>());
    tr.grid = std::make_shared<const WeightedGrid>(h["grid"]["dim"].get<int>(), h["grid"]["L"].get<double>(),
                                                   h["grid"]["nodes"].get<int>());
    tr.stride = h["stride"].get<double>();
    tr.end_s = h["end_s"].get<double>();
    const std::string term = h["termination"].get<std::string>();
    tr.termination = term == "blowup" ? Termination::Blowup : (term == "stopped" ? Termination::Stopped : Termination::Horizon);
    tr.config.ds = h["solver"]["ds"].get<double>();
    tr.config.s_end = h["solver"]["s_end"].get<double>();
    tr.config.stride = h["solver"]["stride"].get<double>();
    tr.config.blowup_factor = h["solver"]["blowup_factor"].get<double>();
    const auto& init = h["initial"];
    const std::string fam = init["family"].get<std::string>();
    tr.initial.family = fam == "va" ? InitialFamily::VA : (fam == "custom" ? InitialFamily::Custom : InitialFamily::MZ);
    tr.initial.s0 = init["s0"].get<double>();
    tr.initial.d0 = init["d0"].get<double>();
    const auto d1 = init["d1"].get<std::vector<double>>();
    tr.initial.d1 = Eigen::Map<const Vec>(d1.data(), static_cast<Eigen::Index>(d1.size()));
    tr.initial.d2 = matrix_from(init["d2"]);
    for (const auto& c : h["corrections"]) tr.corrections.push_back({c.at(0).get<double>(), c.at(1).get<double>()});

    const std::size_t n = h["records"].get<std::size_t>();
    const bool fields = h["has_fields"].get<bool>();
    const Eigen::Index size = tr.grid->size();
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        is.read(reinterpret_cast<char*>(&s), sizeof(double));
        tr.s.push_back(s);
        if (fields) {
            Vec v(size);
            is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(sizeof(double) * size));
            tr.fields.push_back(std::move(v));
        }
    }
    if (!is) throw InvalidInput("load_trajectory: truncated file " + path);
    return tr;
}

} // namespace blowup
