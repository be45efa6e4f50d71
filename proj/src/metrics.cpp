#include "fracta/metrics.hpp"

#include "fracta/rng.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace fracta {

KdTree3::KdTree3(std::vector<Vec3> points) : points_(std::move(points)) {
    if (points_.empty()) throw std::invalid_argument("KdTree3: empty point set");
    order_.resize(points_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = std::int32_t(i);
    nodes_.reserve(2 * points_.size() / 8 + 4);
    build(0, std::int32_t(points_.size()));
}

std::int32_t KdTree3::build(std::int32_t first, std::int32_t count) {
    const std::int32_t id = std::int32_t(nodes_.size());
    nodes_.push_back({});
    if (count <= 8) {
        nodes_[id].first = first;
        nodes_[id].count = count;
        // deterministic tie-break: lowest original index wins the scan
        std::sort(order_.begin() + first, order_.begin() + first + count);
        return id;
    }
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
    for (std::int32_t i = first; i < first + count; ++i) {
        lo = lo.cwiseMin(points_[order_[i]]);
        hi = hi.cwiseMax(points_[order_[i]]);
    }
    int axis;
    (hi - lo).maxCoeff(&axis);
    const std::int32_t mid = first + count / 2;
    std::nth_element(order_.begin() + first, order_.begin() + mid, order_.begin() + first + count,
                     [&](std::int32_t a, std::int32_t b) {
                         return points_[a][axis] != points_[b][axis]
                                    ? points_[a][axis] < points_[b][axis]
                                    : a < b;
                     });
    nodes_[id].axis = axis;
    nodes_[id].split = points_[order_[mid]][axis];
    const std::int32_t l = build(first, mid - first);
    const std::int32_t r = build(mid, first + count - mid);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
}

void KdTree3::search(std::int32_t node, const Vec3& q, std::size_t& best, double& best_sq) const {
    const Node& n = nodes_[node];
    if (n.axis < 0) {
        for (std::int32_t i = n.first; i < n.first + n.count; ++i) {
            const std::size_t idx = std::size_t(order_[i]);
            const double d = (points_[idx] - q).squaredNorm();
            if (d < best_sq || (d == best_sq && idx < best)) {
                best_sq = d;
                best = idx;
            }
        }
        return;
    }
    const double delta = q[n.axis] - n.split;
    const std::int32_t near = delta < 0 ? n.left : n.right;
    const std::int32_t far = delta < 0 ? n.right : n.left;
    search(near, q, best, best_sq);
    if (delta * delta <= best_sq) search(far, q, best, best_sq);
}

std::size_t KdTree3::nearest(const Vec3& q, double& sq_dist) const {
    std::size_t best = points_.size();
    sq_dist = std::numeric_limits<double>::infinity();
    search(0, q, best, sq_dist);
    return best;
}

namespace {

double directed_mean_sq(const std::vector<Vec3>& from, const KdTree3& to) {
    double sum = 0;
    for (const Vec3& p : from) {
        double d;
        to.nearest(p, d);
        sum += d;
    }
    return sum / double(from.size());
}

} // namespace

double chamfer_distance(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("chamfer_distance: empty point set");
    const KdTree3 ta(a), tb(b);
    return directed_mean_sq(a, tb) + directed_mean_sq(b, ta);
}

namespace {

double directed_nc(const SurfaceSamples& from, const SurfaceSamples& to_samples,
                   const KdTree3& to) {
    double sum = 0;
    for (std::size_t i = 0; i < from.points.size(); ++i) {
        double d;
        const std::size_t j = to.nearest(from.points[i], d);
        sum += std::abs(from.normals[i].dot(to_samples.normals[j]));
    }
    return sum / double(from.points.size());
}

} // namespace

double normal_consistency(const TriangleMesh& a, const TriangleMesh& b, std::size_t npoints,
                          std::uint64_t seed) {
    if (a.empty() || b.empty()) throw std::invalid_argument("normal_consistency: empty mesh");
    // same sampling stream for both meshes: identical inputs get identical
    // samples, making NC(A,A) exactly 1
    const SurfaceSamples sa = surface_sample(a, npoints, derive_seed(seed, "nc"));
    const SurfaceSamples sb = surface_sample(b, npoints, derive_seed(seed, "nc"));
    const KdTree3 ta(sa.points), tb(sb.points);
    return 0.5 * (directed_nc(sa, sb, tb) + directed_nc(sb, sa, ta));
}

RotationSearchResult rotation_search_cd(const TriangleMesh& pred, const TriangleMesh& gt, int x,
                                        std::size_t npoints, std::uint64_t seed) {
    if (x < 1) throw std::invalid_argument("rotation_search_cd: x must be >= 1");
    if (pred.empty() || gt.empty())
        throw std::invalid_argument("rotation_search_cd: empty mesh");
    const SurfaceSamples sp = surface_sample(pred, npoints, derive_seed(seed, "rot"));
    const SurfaceSamples sg = surface_sample(gt, npoints, derive_seed(seed, "rot"));
    const KdTree3 tg(sg.points);

    RotationSearchResult best;
    best.cd = std::numeric_limits<double>::infinity();
    best.per_angle_cd.reserve(std::size_t(x));
    for (int i = 0; i < x; ++i) {
        const double deg = 360.0 * i / x;
        const double rad = deg * std::numbers::pi / 180.0;
        const Mat3 rot = Eigen::AngleAxisd(rad, Vec3::UnitY()).toRotationMatrix();
        std::vector<Vec3> rotated(sp.points.size());
        for (std::size_t j = 0; j < sp.points.size(); ++j) rotated[j] = rot * sp.points[j];
        const KdTree3 tr(rotated);
        const double cd = directed_mean_sq(rotated, tg) + directed_mean_sq(sg.points, tr);
        best.per_angle_cd.push_back(cd);
        if (cd < best.cd) {
            best.cd = cd;
            best.angle_deg = deg;
        }
    }
    return best;
}

double nz_percent(const std::vector<bool>& generated) {
    if (generated.empty()) throw std::invalid_argument("nz_percent: empty result list");
    std::size_t n = 0;
    for (bool g : generated) n += g;
    return 100.0 * double(n) / double(generated.size());
}

std::size_t BinaryMask::count() const {
    std::size_t n = 0;
    for (std::uint8_t v : values) n += v != 0;
    return n;
}

BinaryMask BinaryMask::make(int width, int height) {
    if (width <= 0 || height <= 0) throw std::invalid_argument("BinaryMask: dimensions must be positive");
    BinaryMask m;
    m.width = width;
    m.height = height;
    m.values.assign(std::size_t(width) * height, 0);
    return m;
}

double dice(const BinaryMask& a, const BinaryMask& b) {
    if (a.width != b.width || a.height != b.height)
        throw std::invalid_argument("dice: mask dimensions differ");
    std::size_t inter = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        na += a.values[i] != 0;
        nb += b.values[i] != 0;
        inter += (a.values[i] != 0) && (b.values[i] != 0);
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * double(inter) / double(na + nb);
}

BinaryMask largest_component(const BinaryMask& mask, bool eight_connected) {
    const int w = mask.width, h = mask.height;
    std::vector<std::int32_t> comp(mask.values.size(), -1);
    std::size_t best_size = 0;
    std::size_t best_first = mask.values.size(); // scanline index of first pixel
    std::int32_t best_id = -1, next_id = 0;

    std::deque<std::size_t> queue;
    for (std::size_t start = 0; start < mask.values.size(); ++start) {
        if (!mask.values[start] || comp[start] >= 0) continue;
        const std::int32_t id = next_id++;
        std::size_t size = 0;
        comp[start] = id;
        queue.push_back(start);
        while (!queue.empty()) {
            const std::size_t cur = queue.front();
            queue.pop_front();
            ++size;
            const int x = int(cur % w), y = int(cur / w);
            auto visit = [&](int nx, int ny) {
                if (nx < 0 || ny < 0 || nx >= w || ny >= h) return;
                const std::size_t ni = std::size_t(ny) * w + nx;
                if (!mask.values[ni] || comp[ni] >= 0) return;
                comp[ni] = id;
                queue.push_back(ni);
            };
            visit(x - 1, y);
            visit(x + 1, y);
            visit(x, y - 1);
            visit(x, y + 1);
            if (eight_connected) {
                visit(x - 1, y - 1);
                visit(x + 1, y - 1);
                visit(x - 1, y + 1);
                visit(x + 1, y + 1);
            }
        }
        if (size > best_size || (size == best_size && start < best_first)) {
            best_size = size;
            best_first = start;
            best_id = id;
        }
    }

    BinaryMask out = BinaryMask::make(w, h);
    if (best_id >= 0)
        for (std::size_t i = 0; i < out.values.size(); ++i)
            out.values[i] = comp[i] == best_id ? 1 : 0;
    return out;
}

namespace {

double mean_over_nonzero(const std::vector<MetricRow>& rows, double MetricRow::*field) {
    double sum = 0;
    std::size_t n = 0;
    for (const MetricRow& r : rows)
        if (r.nonzero) {
            sum += r.*field;
            ++n;
        }
    return n ? sum / double(n) : 0.0;
}

} // namespace

double MetricReport::mean_cd() const { return mean_over_nonzero(rows, &MetricRow::cd); }
double MetricReport::mean_nc() const { return mean_over_nonzero(rows, &MetricRow::nc); }

double MetricReport::nz() const {
    if (rows.empty()) return 0.0;
    std::size_t n = 0;
    for (const MetricRow& r : rows) n += r.nonzero;
    return 100.0 * double(n) / double(rows.size());
}

std::string MetricReport::to_csv() const {
    std::ostringstream os;
    os.precision(12);
    os << "object_id,cd,nc,angle,nonzero\n";
    for (const MetricRow& r : rows)
        os << r.object_id << "," << r.cd << "," << r.nc << "," << r.angle << ","
           << (r.nonzero ? 1 : 0) << "\n";
    os << "summary,mean_cd=" << mean_cd() << ",mean_nc=" << mean_nc() << ",nz=" << nz()
       << ",count=" << rows.size() << "\n";
    return os.str();
}

} // namespace fracta
