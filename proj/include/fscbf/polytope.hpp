#ifndef FSCBF_POLYTOPE_HPP
#define FSCBF_POLYTOPE_HPP

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fscbf/chebyshev.hpp"
#include "fscbf/types.hpp"

namespace fscbf {

/// Axis-aligned input bounds lower <= u <= upper.
struct Box {
    Vector lower;
    Vector upper;

    Eigen::Index dim() const { return lower.size(); }
    double volume() const { return (upper - lower).prod(); }
    bool contains(const Vector& u, double tol = 0.0) const
    {
        return ((u - lower).array() >= -tol).all() && ((upper - u).array() >= -tol).all();
    }
    Vector clamp(const Vector& u) const { return u.cwiseMax(lower).cwiseMin(upper); }

    static Box symmetric(const Vector& half_width) { return Box{-half_width, half_width}; }
};

struct RowTag {
    enum class Kind { Cbf, InputBound };
    Kind kind = Kind::Cbf;
    int index = 0; // barrier index for Cbf rows, axis for bound rows

    static RowTag cbf(int i) { return {Kind::Cbf, i}; }
    static RowTag bound(int axis) { return {Kind::InputBound, axis}; }
    bool is_cbf() const { return kind == Kind::Cbf; }
};

/// {u : A u <= b} with one tag per row.
class HPolytope {
public:
    HPolytope() = default;
    explicit HPolytope(Eigen::Index dim) : A_(0, dim), b_(0) {}

    HPolytope(Matrix A, Vector b, std::vector<RowTag> tags)
        : A_(std::move(A)), b_(std::move(b)), tags_(std::move(tags))
    {
        if (A_.rows() != b_.size() || static_cast<std::size_t>(A_.rows()) != tags_.size()) {
            throw std::invalid_argument("HPolytope: row count mismatch");
        }
        if (A_.cols() < 1) throw std::invalid_argument("HPolytope: need at least one column");
        for (Eigen::Index i = 0; i < A_.rows(); ++i) note_row(i);
    }

    /// Polytope consisting of the 2m box rows, ordered +e_0, -e_0, +e_1, ...
    static HPolytope from_box(const Box& box)
    {
        HPolytope p(box.dim());
        p.add_bounds(box);
        return p;
    }

    void add_row(const Eigen::RowVectorXd& a, double b, RowTag tag)
    {
        if (a.size() != dim()) throw std::invalid_argument("HPolytope::add_row: wrong row length");
        const Eigen::Index r = A_.rows();
        A_.conservativeResize(r + 1, Eigen::NoChange);
        b_.conservativeResize(r + 1);
        A_.row(r) = a;
        b_(r) = b;
        tags_.push_back(tag);
        note_row(r);
    }

    void add_bounds(const Box& box)
    {
        for (Eigen::Index j = 0; j < box.dim(); ++j) {
            Eigen::RowVectorXd e = Eigen::RowVectorXd::Zero(dim());
            e(j) = 1.0;
            add_row(e, box.upper(j), RowTag::bound(static_cast<int>(j)));
            add_row(-e, -box.lower(j), RowTag::bound(static_cast<int>(j)));
        }
    }

    Eigen::Index dim() const { return A_.cols(); }
    Eigen::Index rows() const { return A_.rows(); }
    const Matrix& A() const { return A_; }
    const Vector& b() const { return b_; }
    const std::vector<RowTag>& tags() const { return tags_; }
    bool flagged_empty() const { return flagged_empty_; }

    bool contains(const Vector& u, double tol = 0.0) const
    {
        return rows() == 0 || ((b_ - A_ * u).array() >= -tol).all();
    }

    /// Bounding box spanned by the InputBound rows; throws if incomplete.
    Box input_box() const
    {
        const auto inf = std::numeric_limits<double>::infinity();
        Box box{Vector::Constant(dim(), -inf), Vector::Constant(dim(), inf)};
        for (Eigen::Index i = 0; i < rows(); ++i) {
            if (tags_[i].is_cbf()) continue;
            const int j = tags_[i].index;
            const double s = A_(i, j);
            if (s > 0.0) box.upper(j) = std::min(box.upper(j), b_(i) / s);
            else if (s < 0.0) box.lower(j) = std::max(box.lower(j), b_(i) / s);
        }
        if (!box.lower.allFinite() || !box.upper.allFinite()) {
            throw std::invalid_argument("HPolytope::input_box: input-bound rows do not form a box");
        }
        return box;
    }

private:
    void note_row(Eigen::Index i)
    {
        if (A_.row(i).norm() == 0.0 && b_(i) < 0.0) flagged_empty_ = true;
    }

    Matrix A_;
    Vector b_;
    std::vector<RowTag> tags_;
    bool flagged_empty_ = false;
};

/// True iff the polytope has empty interior (Chebyshev radius <= 0).
inline bool is_empty(const HPolytope& p)
{
    if (p.flagged_empty()) return true;
    if (p.rows() == 0) return false;
    const ChebyshevResult r = solve_chebyshev(p.A(), p.b());
    if (r.status == ChebyshevStatus::Unbounded) return false;
    return r.status != ChebyshevStatus::Optimal || r.radius <= 0.0;
}

// JSON fixture format: {"A": [[...], ...], "b": [...], "tags": ["cbf:0", "bound:1", ...]}.
// "A" may also be a flat row-major list when "cols" is given.

inline std::string tag_to_string(const RowTag& t)
{
    return (t.is_cbf() ? "cbf:" : "bound:") + std::to_string(t.index);
}

inline RowTag tag_from_string(const std::string& s)
{
    const auto colon = s.find(':');
    const std::string kind = s.substr(0, colon);
    const int idx = colon == std::string::npos ? 0 : std::stoi(s.substr(colon + 1));
    if (kind == "cbf") return RowTag::cbf(idx);
    if (kind == "bound") return RowTag::bound(idx);
    throw std::invalid_argument("unknown row tag '" + s + "'");
}

inline nlohmann::json to_json(const HPolytope& p)
{
    nlohmann::json A = nlohmann::json::array();
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < p.dim(); ++j) row.push_back(p.A()(i, j));
        A.push_back(row);
    }
    nlohmann::json b = nlohmann::json::array();
    nlohmann::json tags = nlohmann::json::array();
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        b.push_back(p.b()(i));
        tags.push_back(tag_to_string(p.tags()[i]));
    }
    return {{"A", A}, {"b", b}, {"tags", tags}};
}

inline HPolytope polytope_from_json(const nlohmann::json& j)
{
    const auto& jb = j.at("b");
    const auto rows = static_cast<Eigen::Index>(jb.size());
    const auto& jA = j.at("A");
    Eigen::Index cols = 0;
    Matrix A;
    if (rows > 0 && jA.at(0).is_array()) {
        cols = static_cast<Eigen::Index>(jA.at(0).size());
        A.resize(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i) {
            if (static_cast<Eigen::Index>(jA.at(i).size()) != cols) throw std::invalid_argument("ragged A");
            for (Eigen::Index c = 0; c < cols; ++c) A(i, c) = jA.at(i).at(c).get<double>();
        }
    } else {
        cols = j.contains("cols") ? j.at("cols").get<Eigen::Index>()
                                  : (rows > 0 ? static_cast<Eigen::Index>(jA.size()) / rows : 0);
        if (cols * rows != static_cast<Eigen::Index>(jA.size())) throw std::invalid_argument("flat A size mismatch");
        A.resize(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index c = 0; c < cols; ++c) A(i, c) = jA.at(i * cols + c).get<double>();
    }
    Vector b(rows);
    for (Eigen::Index i = 0; i < rows; ++i) b(i) = jb.at(i).get<double>();
    std::vector<RowTag> tags;
    if (j.contains("tags")) {
        for (const auto& t : j.at("tags")) tags.push_back(tag_from_string(t.get<std::string>()));
    } else {
        tags.assign(static_cast<std::size_t>(rows), RowTag::cbf(0));
    }
    return HPolytope(std::move(A), std::move(b), std::move(tags));
}

} // namespace fscbf

#endif // FSCBF_POLYTOPE_HPP
