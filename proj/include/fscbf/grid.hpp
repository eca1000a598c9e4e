#ifndef FSCBF_GRID_HPP
#define FSCBF_GRID_HPP

#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fscbf/barrier.hpp"
#include "fscbf/types.hpp"

namespace fscbf {

/// Row-major occupancy grid; cell (ix, iy) covers
/// [origin.x + ix*res, origin.x + (ix+1)*res) x [origin.y + iy*res, ...).
/// Row iy = 0 is the bottom (smallest y) of the map.
class OccupancyGrid {
public:
    OccupancyGrid() = default;
    OccupancyGrid(int width, int height, double resolution, Eigen::Vector2d origin)
        : width_(width), height_(height), resolution_(resolution), origin_(origin),
          cells_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0)
    {
        if (!(resolution > 0.0)) throw std::invalid_argument("OccupancyGrid: resolution must be positive");
        if (width <= 0 || height <= 0) throw std::invalid_argument("OccupancyGrid: empty grid");
    }

    int width() const { return width_; }
    int height() const { return height_; }
    double resolution() const { return resolution_; }
    const Eigen::Vector2d& origin() const { return origin_; }

    bool inside(int ix, int iy) const { return ix >= 0 && iy >= 0 && ix < width_ && iy < height_; }
    bool occupied(int ix, int iy) const { return inside(ix, iy) && cells_[index(ix, iy)] != 0; }
    void set(int ix, int iy, bool occ = true)
    {
        if (!inside(ix, iy)) throw std::out_of_range("OccupancyGrid::set: cell outside grid");
        cells_[index(ix, iy)] = occ ? 1 : 0;
    }

    std::pair<int, int> cell_of(const Eigen::Vector2d& p) const
    {
        return {static_cast<int>(std::floor((p.x() - origin_.x()) / resolution_)),
                static_cast<int>(std::floor((p.y() - origin_.y()) / resolution_))};
    }
    Eigen::Vector2d cell_center(int ix, int iy) const
    {
        return origin_ + resolution_ * Eigen::Vector2d(ix + 0.5, iy + 0.5);
    }

private:
    std::size_t index(int ix, int iy) const
    {
        return static_cast<std::size_t>(iy) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(ix);
    }

    int width_ = 0;
    int height_ = 0;
    double resolution_ = 1.0;
    Eigen::Vector2d origin_ = Eigen::Vector2d::Zero();
    std::vector<unsigned char> cells_;
};

/// Reads a P2 (ASCII) or P5 (binary) PGM map. Pixels darker than
/// `threshold` are occupied; the top image row becomes the top of the map.
inline OccupancyGrid load_pgm(const std::string& path, double resolution, const Eigen::Vector2d& origin,
                              int threshold = 128)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open PGM file " + path);
    auto next_token = [&in]() {
        std::string tok;
        while (in >> tok) {
            if (tok[0] == '#') {
                std::string rest;
                std::getline(in, rest);
                continue;
            }
            return tok;
        }
        throw std::runtime_error("truncated PGM header");
    };
    const std::string magic = next_token();
    if (magic != "P2" && magic != "P5") throw std::runtime_error("unsupported PGM magic " + magic);
    const int w = std::stoi(next_token());
    const int h = std::stoi(next_token());
    const int maxval = std::stoi(next_token());
    if (maxval <= 0 || maxval > 65535) throw std::runtime_error("bad PGM maxval");
    OccupancyGrid grid(w, h, resolution, origin);
    if (magic == "P5") {
        in.get(); // single whitespace after header
        const int bytes = maxval > 255 ? 2 : 1;
        std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h * bytes);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (in.gcount() != static_cast<std::streamsize>(buf.size())) throw std::runtime_error("truncated PGM data");
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) {
                const std::size_t k = (static_cast<std::size_t>(r) * w + c) * bytes;
                const int v = bytes == 2 ? (buf[k] << 8) | buf[k + 1] : buf[k];
                grid.set(c, h - 1 - r, v < threshold);
            }
    } else {
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) grid.set(c, h - 1 - r, std::stoi(next_token()) < threshold);
    }
    return grid;
}

/// JSON grid: {"resolution": r, "origin": [x, y], "cells": [[0, 1, ...], ...]}
/// with cells[0] the bottom row; nonzero entries are occupied.
inline OccupancyGrid grid_from_json(const nlohmann::json& j)
{
    const auto& rows = j.at("cells");
    const int h = static_cast<int>(rows.size());
    const int w = h > 0 ? static_cast<int>(rows.at(0).size()) : 0;
    Eigen::Vector2d origin = Eigen::Vector2d::Zero();
    if (j.contains("origin")) origin = {j.at("origin").at(0).get<double>(), j.at("origin").at(1).get<double>()};
    OccupancyGrid grid(w, h, j.at("resolution").get<double>(), origin);
    for (int iy = 0; iy < h; ++iy) {
        if (static_cast<int>(rows.at(iy).size()) != w) throw std::invalid_argument("grid rows must have equal length");
        for (int ix = 0; ix < w; ++ix) grid.set(ix, iy, rows.at(iy).at(ix).get<int>() != 0);
    }
    return grid;
}

struct RobotInCollision : std::runtime_error {
    RobotInCollision() : std::runtime_error("robot cell is occupied") {}
};

struct RayHit {
    int ix = 0;
    int iy = 0;
    double distance = 0.0; // along the ray to the cell entry point
};

/// First occupied cell along the ray from `from` at heading `theta`, by exact
/// cell traversal, within `max_range`.
inline std::optional<RayHit> cast_ray(const OccupancyGrid& grid, const Eigen::Vector2d& from, double theta,
                                      double max_range)
{
    const double res = grid.resolution();
    const Eigen::Vector2d dir(std::cos(theta), std::sin(theta));
    auto [ix, iy] = grid.cell_of(from);
    const int step_x = dir.x() > 0 ? 1 : (dir.x() < 0 ? -1 : 0);
    const int step_y = dir.y() > 0 ? 1 : (dir.y() < 0 ? -1 : 0);
    const double inf = std::numeric_limits<double>::infinity();
    const double eps = 1e-12;
    auto boundary_t = [&](double pos, double org, int cell, int step, double d) {
        if (std::abs(d) < eps) return inf;
        const double edge = org + res * (cell + (step > 0 ? 1 : 0));
        return (edge - pos) / d;
    };
    double t_max_x = boundary_t(from.x(), grid.origin().x(), ix, step_x, dir.x());
    double t_max_y = boundary_t(from.y(), grid.origin().y(), iy, step_y, dir.y());
    const double t_delta_x = std::abs(dir.x()) < eps ? inf : res / std::abs(dir.x());
    const double t_delta_y = std::abs(dir.y()) < eps ? inf : res / std::abs(dir.y());
    for (;;) {
        double t_entry = 0.0;
        if (t_max_x < t_max_y) {
            t_entry = t_max_x;
            ix += step_x;
            t_max_x += t_delta_x;
        } else {
            t_entry = t_max_y;
            iy += step_y;
            t_max_y += t_delta_y;
        }
        if (t_entry > max_range || !grid.inside(ix, iy)) return std::nullopt;
        if (grid.occupied(ix, iy)) return RayHit{ix, iy, t_entry};
    }
}

struct GridRayOptions {
    int n_dirs = 12;
    double d_min = 0.3;
    double max_range = 5.0;
    int relative_degree = 2;
    ClassKChain chain{2.0, 6.0};
};

/// One static circle barrier per ray direction theta = beta * 360/n_dirs,
/// beta = 1..n_dirs, anchored at the center of the nearest occupied cell.
inline std::vector<BarrierSpec> grid_ray_barriers(const OccupancyGrid& grid, const DynamicsModel& model,
                                                  const Vector& x, const GridRayOptions& opts = {})
{
    const Eigen::Vector2d p = model.position(x);
    const auto [cx, cy] = grid.cell_of(p);
    if (grid.occupied(cx, cy)) throw RobotInCollision();
    std::vector<BarrierSpec> out;
    for (int beta = 1; beta <= opts.n_dirs; ++beta) {
        const double theta = 2.0 * std::numbers::pi * beta / opts.n_dirs;
        const auto hit = cast_ray(grid, p, theta, opts.max_range);
        if (!hit) continue;
        out.push_back(circle_barrier(model, grid.cell_center(hit->ix, hit->iy), opts.d_min, opts.relative_degree,
                                     opts.chain, Eigen::Vector2d::Zero(), 0.0, "ray" + std::to_string(beta)));
    }
    return out;
}

} // namespace fscbf

#endif // FSCBF_GRID_HPP
