#pragma once

#include <json.hpp>

#include "quantum.hpp"

namespace spinorbit {

//! {dim, basis_labels: [[spin, ell], ...], re: [[...]], im: [[...]]}, row-major.
inline nlohmann::json to_json(DensityMatrix const& rho)
{
    nlohmann::json j;
    j["dim"] = rho.dim();
    auto labels = nlohmann::json::array();
    for (auto const& l : rho.labels())
        labels.push_back({l.spin, l.ell});
    j["basis_labels"] = std::move(labels);
    auto re = nlohmann::json::array();
    auto im = nlohmann::json::array();
    for (Eigen::Index r = 0; r < rho.dim(); ++r)
    {
        auto re_row = nlohmann::json::array();
        auto im_row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < rho.dim(); ++c)
        {
            re_row.push_back(rho(r, c).real());
            im_row.push_back(rho(r, c).imag());
        }
        re.push_back(std::move(re_row));
        im.push_back(std::move(im_row));
    }
    j["re"] = std::move(re);
    j["im"] = std::move(im);
    return j;
}

inline DensityMatrix density_matrix_from_json(nlohmann::json const& j)
{
    try
    {
        auto const dim = j.at("dim").get<Eigen::Index>();
        if (dim <= 0)
            throw InvalidArgument("density matrix JSON: dim must be positive");
        BasisLabels labels;
        for (auto const& l : j.at("basis_labels"))
        {
            if (!l.is_array() || l.size() != 2)
                throw InvalidArgument("density matrix JSON: basis label must be [spin, ell]");
            labels.push_back({l[0].get<int>(), l[1].get<int>()});
        }
        auto const& re = j.at("re");
        auto const& im = j.at("im");
        if (static_cast<Eigen::Index>(re.size()) != dim ||
            static_cast<Eigen::Index>(im.size()) != dim)
            throw InvalidArgument("density matrix JSON: row count does not match dim");
        CMatrix m(dim, dim);
        for (Eigen::Index r = 0; r < dim; ++r)
        {
            if (static_cast<Eigen::Index>(re[r].size()) != dim ||
                static_cast<Eigen::Index>(im[r].size()) != dim)
                throw InvalidArgument("density matrix JSON: column count does not match dim");
            for (Eigen::Index c = 0; c < dim; ++c)
                m(r, c) = {re[r][c].get<double>(), im[r][c].get<double>()};
        }
        return {std::move(m), std::move(labels)};
    }
    catch (nlohmann::json::exception const& e)
    {
        throw InvalidArgument(std::string("density matrix JSON: ") + e.what());
    }
}

}  // namespace spinorbit
