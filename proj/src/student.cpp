#include "adatrack/student.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace adatrack {

namespace {

struct Block {
    int offset = 0;
    int size = 0;
};

struct Layout {
    std::vector<Block> conv_w, conv_b;
    std::vector<Block> dense_w, dense_b;
    Block wg, ug, bg, wc, uc, bc;
    Block action_w, action_b, value_w, value_b;
    int total = 0;
};

Layout make_layout(const Architecture& arch) {
    Layout lay;
    int off = 0;
    auto take = [&off](int n) {
        Block b{off, n};
        off += n;
        return b;
    };
    for (const ConvLayerSpec& c : arch.convs) {
        lay.conv_w.push_back(take(c.out_channels * c.in_channels * c.kernel * c.kernel));
        lay.conv_b.push_back(take(c.out_channels));
    }
    int prev = arch.feature_dim();
    for (int width : arch.dense) {
        lay.dense_w.push_back(take(width * prev));
        lay.dense_b.push_back(take(width));
        prev = width;
    }
    if (arch.recurrent) {
        const int h = arch.hidden_dim();
        lay.wg = take(h * h);
        lay.ug = take(h * h);
        lay.bg = take(h);
        lay.wc = take(h * h);
        lay.uc = take(h * h);
        lay.bc = take(h);
    }
    const int h = arch.hidden_dim();
    lay.action_w = take(4 * h);
    lay.action_b = take(4);
    lay.value_w = take(h);
    lay.value_b = take(1);
    lay.total = off;
    return lay;
}

double relu(double z) { return z > 0.0 ? z : 0.0; }

// y = W x + b, W row-major (rows x cols).
void dense_forward(const double* w, const double* b, const double* x, int rows, int cols,
                   double* y) {
    for (int r = 0; r < rows; ++r) {
        double acc = b[r];
        const double* wr = w + static_cast<std::size_t>(r) * cols;
        for (int c = 0; c < cols; ++c) acc += wr[c] * x[c];
        y[r] = acc;
    }
}

// Accumulates dW += dy x^T, db += dy, dx += W^T dy. db and dx may be null.
void dense_backward(const double* w, const double* x, const double* dy, int rows, int cols,
                    double* dw, double* db, double* dx) {
    for (int r = 0; r < rows; ++r) {
        const double g = dy[r];
        if (db) db[r] += g;
        const double* wr = w + static_cast<std::size_t>(r) * cols;
        double* dwr = dw + static_cast<std::size_t>(r) * cols;
        for (int c = 0; c < cols; ++c) {
            dwr[c] += g * x[c];
            if (dx) dx[c] += wr[c] * g;
        }
    }
}

void conv_forward(const ConvLayerSpec& spec, int in_dim, const double* w, const double* b,
                  const double* in, double* z) {
    const int out_dim = (in_dim - spec.kernel) / spec.stride + 1;
    const int k = spec.kernel;
    for (int oc = 0; oc < spec.out_channels; ++oc) {
        const double* woc = w + static_cast<std::size_t>(oc) * spec.in_channels * k * k;
        double* zoc = z + static_cast<std::size_t>(oc) * out_dim * out_dim;
        for (int oy = 0; oy < out_dim; ++oy) {
            for (int ox = 0; ox < out_dim; ++ox) {
                double acc = b[oc];
                for (int ic = 0; ic < spec.in_channels; ++ic) {
                    const double* inc = in + static_cast<std::size_t>(ic) * in_dim * in_dim;
                    const double* wic = woc + static_cast<std::size_t>(ic) * k * k;
                    const int base_y = oy * spec.stride;
                    const int base_x = ox * spec.stride;
                    for (int ky = 0; ky < k; ++ky) {
                        const double* row = inc + static_cast<std::size_t>(base_y + ky) * in_dim;
                        const double* wrow = wic + static_cast<std::size_t>(ky) * k;
                        for (int kx = 0; kx < k; ++kx) acc += wrow[kx] * row[base_x + kx];
                    }
                }
                zoc[static_cast<std::size_t>(oy) * out_dim + ox] = acc;
            }
        }
    }
}

// dz already includes the ReLU derivative. din may be null for the first layer.
void conv_backward(const ConvLayerSpec& spec, int in_dim, const double* w, const double* in,
                   const double* dz, double* dw, double* db, double* din) {
    const int out_dim = (in_dim - spec.kernel) / spec.stride + 1;
    const int k = spec.kernel;
    for (int oc = 0; oc < spec.out_channels; ++oc) {
        const double* woc = w + static_cast<std::size_t>(oc) * spec.in_channels * k * k;
        double* dwoc = dw + static_cast<std::size_t>(oc) * spec.in_channels * k * k;
        const double* dzoc = dz + static_cast<std::size_t>(oc) * out_dim * out_dim;
        for (int oy = 0; oy < out_dim; ++oy) {
            for (int ox = 0; ox < out_dim; ++ox) {
                const double g = dzoc[static_cast<std::size_t>(oy) * out_dim + ox];
                if (g == 0.0) continue;
                db[oc] += g;
                const int base_y = oy * spec.stride;
                const int base_x = ox * spec.stride;
                for (int ic = 0; ic < spec.in_channels; ++ic) {
                    const double* inc = in + static_cast<std::size_t>(ic) * in_dim * in_dim;
                    double* dinc = din ? din + static_cast<std::size_t>(ic) * in_dim * in_dim
                                       : nullptr;
                    const double* wic = woc + static_cast<std::size_t>(ic) * k * k;
                    double* dwic = dwoc + static_cast<std::size_t>(ic) * k * k;
                    for (int ky = 0; ky < k; ++ky) {
                        const std::size_t row = static_cast<std::size_t>(base_y + ky) * in_dim;
                        for (int kx = 0; kx < k; ++kx) {
                            const std::size_t idx = row + base_x + kx;
                            dwic[static_cast<std::size_t>(ky) * k + kx] += g * inc[idx];
                            if (dinc) dinc[idx] += wic[static_cast<std::size_t>(ky) * k + kx] * g;
                        }
                    }
                }
            }
        }
    }
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Everything the backward pass needs from one forward step.
struct StepTape {
    // conv_in[p][l] is the input to conv layer l for patch p; conv_z[p][l]
    // the pre-activation output.
    std::vector<std::vector<double>> conv_in[2];
    std::vector<std::vector<double>> conv_z[2];
    std::vector<double> feat;
    std::vector<std::vector<double>> dense_z;
    std::vector<std::vector<double>> dense_a;
    std::vector<double> h_in, g, c, h_out;
    std::array<double, 4> u{};
    std::array<double, 4> mu{};
    double value = 0.0;

    const std::vector<double>& head_input(bool recurrent) const {
        return recurrent ? h_out : dense_a.back();
    }
};

void forward_step(const StudentParams& params, const Layout& lay, const State& state,
                  const std::vector<double>& h_prev, StepTape& tape) {
    const Architecture& arch = params.arch;
    if (state.resolution != arch.patch) {
        throw std::invalid_argument("forward: state resolution does not match architecture");
    }
    const double* th = params.theta.data();
    const std::vector<int> dims = arch.conv_dims();

    for (int p = 0; p < 2; ++p) {
        const std::vector<double>& patch = (p == 0) ? state.patch_prev : state.patch_cur;
        if (static_cast<int>(patch.size()) != arch.patch * arch.patch) {
            throw std::invalid_argument("forward: patch size does not match architecture");
        }
        tape.conv_in[p].resize(arch.convs.size());
        tape.conv_z[p].resize(arch.convs.size());
        std::vector<double> cur = patch;
        int in_dim = arch.patch;
        for (std::size_t l = 0; l < arch.convs.size(); ++l) {
            const ConvLayerSpec& spec = arch.convs[l];
            const int out_dim = dims[l];
            tape.conv_in[p][l] = std::move(cur);
            tape.conv_z[p][l].assign(
                static_cast<std::size_t>(spec.out_channels) * out_dim * out_dim, 0.0);
            conv_forward(spec, in_dim, th + lay.conv_w[l].offset, th + lay.conv_b[l].offset,
                         tape.conv_in[p][l].data(), tape.conv_z[p][l].data());
            cur.resize(tape.conv_z[p][l].size());
            for (std::size_t i = 0; i < cur.size(); ++i) cur[i] = relu(tape.conv_z[p][l][i]);
            in_dim = out_dim;
        }
        if (p == 0) {
            tape.feat.assign(static_cast<std::size_t>(arch.feature_dim()), 0.0);
            std::copy(cur.begin(), cur.end(), tape.feat.begin());
        } else {
            std::copy(cur.begin(), cur.end(),
                      tape.feat.begin() + static_cast<std::ptrdiff_t>(arch.conv_feature_dim()));
        }
    }

    tape.dense_z.resize(arch.dense.size());
    tape.dense_a.resize(arch.dense.size());
    const std::vector<double>* x = &tape.feat;
    int prev = arch.feature_dim();
    for (std::size_t j = 0; j < arch.dense.size(); ++j) {
        const int width = arch.dense[j];
        tape.dense_z[j].assign(static_cast<std::size_t>(width), 0.0);
        dense_forward(th + lay.dense_w[j].offset, th + lay.dense_b[j].offset, x->data(), width,
                      prev, tape.dense_z[j].data());
        tape.dense_a[j].resize(static_cast<std::size_t>(width));
        for (int i = 0; i < width; ++i) tape.dense_a[j][static_cast<std::size_t>(i)] =
            relu(tape.dense_z[j][static_cast<std::size_t>(i)]);
        x = &tape.dense_a[j];
        prev = width;
    }

    if (arch.recurrent) {
        const int h = arch.hidden_dim();
        tape.h_in = h_prev;
        if (tape.h_in.empty()) tape.h_in.assign(static_cast<std::size_t>(h), 0.0);
        if (static_cast<int>(tape.h_in.size()) != h) {
            throw std::invalid_argument("forward: memory dimension mismatch");
        }
        const std::vector<double>& xin = tape.dense_a.back();
        std::vector<double> zg(static_cast<std::size_t>(h)), zc(static_cast<std::size_t>(h));
        dense_forward(th + lay.wg.offset, th + lay.bg.offset, xin.data(), h, h, zg.data());
        for (int i = 0; i < h; ++i) {
            double acc = zg[static_cast<std::size_t>(i)];
            const double* ur = th + lay.ug.offset + static_cast<std::size_t>(i) * h;
            for (int jj = 0; jj < h; ++jj) acc += ur[jj] * tape.h_in[static_cast<std::size_t>(jj)];
            zg[static_cast<std::size_t>(i)] = acc;
        }
        dense_forward(th + lay.wc.offset, th + lay.bc.offset, xin.data(), h, h, zc.data());
        for (int i = 0; i < h; ++i) {
            double acc = zc[static_cast<std::size_t>(i)];
            const double* ur = th + lay.uc.offset + static_cast<std::size_t>(i) * h;
            for (int jj = 0; jj < h; ++jj) acc += ur[jj] * tape.h_in[static_cast<std::size_t>(jj)];
            zc[static_cast<std::size_t>(i)] = acc;
        }
        tape.g.resize(static_cast<std::size_t>(h));
        tape.c.resize(static_cast<std::size_t>(h));
        tape.h_out.resize(static_cast<std::size_t>(h));
        for (int i = 0; i < h; ++i) {
            const std::size_t ii = static_cast<std::size_t>(i);
            tape.g[ii] = sigmoid(zg[ii]);
            tape.c[ii] = std::tanh(zc[ii]);
            tape.h_out[ii] = (1.0 - tape.g[ii]) * tape.h_in[ii] + tape.g[ii] * tape.c[ii];
        }
    }

    const std::vector<double>& head_in = tape.head_input(arch.recurrent);
    const int h = arch.hidden_dim();
    double u[4];
    dense_forward(th + lay.action_w.offset, th + lay.action_b.offset, head_in.data(), 4, h, u);
    for (int d = 0; d < 4; ++d) {
        tape.u[static_cast<std::size_t>(d)] = u[d];
        tape.mu[static_cast<std::size_t>(d)] = std::tanh(u[d]);
    }
    double v = 0.0;
    dense_forward(th + lay.value_w.offset, th + lay.value_b.offset, head_in.data(), 1, h, &v);
    tape.value = v;
}

// Backward through one step. dmu/dvalue are the loss seeds at this step;
// dh_carry is dLoss/dh_out arriving from the following step and is replaced
// by dLoss/dh_in for the preceding one.
void backward_step(const StudentParams& params, const Layout& lay, const StepTape& tape,
                   const std::array<double, 4>& dmu, double dvalue,
                   std::vector<double>& dh_carry, std::vector<double>& grad) {
    const Architecture& arch = params.arch;
    const double* th = params.theta.data();
    double* gr = grad.data();
    const int h = arch.hidden_dim();
    const std::vector<double>& head_in = tape.head_input(arch.recurrent);

    double du[4];
    for (int d = 0; d < 4; ++d) {
        const std::size_t dd = static_cast<std::size_t>(d);
        du[d] = dmu[dd] * (1.0 - tape.mu[dd] * tape.mu[dd]);
    }
    std::vector<double> dhead(static_cast<std::size_t>(h), 0.0);
    dense_backward(th + lay.action_w.offset, head_in.data(), du, 4, h,
                   gr + lay.action_w.offset, gr + lay.action_b.offset, dhead.data());
    dense_backward(th + lay.value_w.offset, head_in.data(), &dvalue, 1, h,
                   gr + lay.value_w.offset, gr + lay.value_b.offset, dhead.data());

    std::vector<double> dx_last;
    if (arch.recurrent) {
        std::vector<double> dh_out = std::move(dhead);
        if (!dh_carry.empty()) {
            for (int i = 0; i < h; ++i) dh_out[static_cast<std::size_t>(i)] +=
                dh_carry[static_cast<std::size_t>(i)];
        }
        std::vector<double> dzg(static_cast<std::size_t>(h)), dzc(static_cast<std::size_t>(h));
        std::vector<double> dh_in(static_cast<std::size_t>(h), 0.0);
        for (int i = 0; i < h; ++i) {
            const std::size_t ii = static_cast<std::size_t>(i);
            const double dg = dh_out[ii] * (tape.c[ii] - tape.h_in[ii]);
            const double dc = dh_out[ii] * tape.g[ii];
            dh_in[ii] += dh_out[ii] * (1.0 - tape.g[ii]);
            dzc[ii] = dc * (1.0 - tape.c[ii] * tape.c[ii]);
            dzg[ii] = dg * tape.g[ii] * (1.0 - tape.g[ii]);
        }
        dx_last.assign(static_cast<std::size_t>(h), 0.0);
        const std::vector<double>& xin = tape.dense_a.back();
        dense_backward(th + lay.wc.offset, xin.data(), dzc.data(), h, h, gr + lay.wc.offset,
                       gr + lay.bc.offset, dx_last.data());
        dense_backward(th + lay.uc.offset, tape.h_in.data(), dzc.data(), h, h, gr + lay.uc.offset,
                       nullptr, dh_in.data());
        dense_backward(th + lay.wg.offset, xin.data(), dzg.data(), h, h, gr + lay.wg.offset,
                       gr + lay.bg.offset, dx_last.data());
        dense_backward(th + lay.ug.offset, tape.h_in.data(), dzg.data(), h, h, gr + lay.ug.offset,
                       nullptr, dh_in.data());
        dh_carry = std::move(dh_in);
    } else {
        dx_last = std::move(dhead);
    }

    // Dense stack, last to first.
    std::vector<double> da = std::move(dx_last);
    for (int j = static_cast<int>(arch.dense.size()) - 1; j >= 0; --j) {
        const std::size_t js = static_cast<std::size_t>(j);
        const int width = arch.dense[js];
        std::vector<double> dz(static_cast<std::size_t>(width));
        for (int i = 0; i < width; ++i) {
            const std::size_t ii = static_cast<std::size_t>(i);
            dz[ii] = tape.dense_z[js][ii] > 0.0 ? da[ii] : 0.0;
        }
        const std::vector<double>& input = (j == 0) ? tape.feat : tape.dense_a[js - 1];
        const int prev = static_cast<int>(input.size());
        std::vector<double> dprev(static_cast<std::size_t>(prev), 0.0);
        dense_backward(th + lay.dense_w[js].offset, input.data(), dz.data(), width, prev,
                       gr + lay.dense_w[js].offset, gr + lay.dense_b[js].offset, dprev.data());
        da = std::move(dprev);
    }

    // Split the feature gradient into the two patches and run the shared
    // conv stack backward for each.
    const std::vector<int> dims = arch.conv_dims();
    const int per_patch = arch.conv_feature_dim();
    for (int p = 0; p < 2; ++p) {
        std::vector<double> dcur(da.begin() + static_cast<std::ptrdiff_t>(p) * per_patch,
                                 da.begin() + static_cast<std::ptrdiff_t>(p + 1) * per_patch);
        for (int l = static_cast<int>(arch.convs.size()) - 1; l >= 0; --l) {
            const std::size_t ls = static_cast<std::size_t>(l);
            const ConvLayerSpec& spec = arch.convs[ls];
            const int in_dim = (l == 0) ? arch.patch : dims[ls - 1];
            // ReLU derivative on this layer's pre-activation.
            std::vector<double> dz(tape.conv_z[p][ls].size());
            for (std::size_t i = 0; i < dz.size(); ++i) {
                dz[i] = tape.conv_z[p][ls][i] > 0.0 ? dcur[i] : 0.0;
            }
            std::vector<double> din;
            double* din_ptr = nullptr;
            if (l > 0) {
                din.assign(tape.conv_in[p][ls].size(), 0.0);
                din_ptr = din.data();
            }
            conv_backward(spec, in_dim, th + lay.conv_w[ls].offset, tape.conv_in[p][ls].data(),
                          dz.data(), gr + lay.conv_w[ls].offset, gr + lay.conv_b[ls].offset,
                          din_ptr);
            dcur = std::move(din);
        }
    }
}

void orthogonal_fill(double* w, int rows, int cols, Rng& rng) {
    // Orthonormalize along the smaller dimension with modified Gram-Schmidt.
    const bool by_rows = rows <= cols;
    const int vecs = by_rows ? rows : cols;
    const int dim = by_rows ? cols : rows;
    std::vector<std::vector<double>> basis(static_cast<std::size_t>(vecs),
                                           std::vector<double>(static_cast<std::size_t>(dim)));
    for (auto& v : basis) {
        for (double& x : v) x = rng.gaussian();
    }
    for (int i = 0; i < vecs; ++i) {
        auto& vi = basis[static_cast<std::size_t>(i)];
        for (int j = 0; j < i; ++j) {
            const auto& vj = basis[static_cast<std::size_t>(j)];
            double dot = 0.0;
            for (int d = 0; d < dim; ++d) dot += vi[static_cast<std::size_t>(d)] *
                vj[static_cast<std::size_t>(d)];
            for (int d = 0; d < dim; ++d) vi[static_cast<std::size_t>(d)] -=
                dot * vj[static_cast<std::size_t>(d)];
        }
        double norm = 0.0;
        for (double x : vi) norm += x * x;
        norm = std::sqrt(norm);
        if (norm < 1e-12) norm = 1.0;
        for (double& x : vi) x /= norm;
    }
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const double v = by_rows ? basis[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]
                                     : basis[static_cast<std::size_t>(c)][static_cast<std::size_t>(r)];
            w[static_cast<std::size_t>(r) * cols + c] = v;
        }
    }
}

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

void write_doubles(std::ostream& os, const std::vector<double>& v) {
    write_pod<std::uint64_t>(os, v.size());
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> read_doubles(std::istream& is) {
    const std::uint64_t n = read_pod<std::uint64_t>(is);
    std::vector<double> v(n);
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!is) throw std::runtime_error("checkpoint: truncated parameter block");
    return v;
}

constexpr std::uint32_t kCheckpointMagic = 0x4b544441;  // "ADTK"
constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

void Architecture::validate() const {
    if (patch <= 0) throw std::invalid_argument("architecture: patch must be positive");
    if (dense.empty()) throw std::invalid_argument("architecture: need at least one dense layer");
    int dim = patch;
    int ch = 1;
    for (const ConvLayerSpec& c : convs) {
        if (c.in_channels != ch) throw std::invalid_argument("architecture: channel mismatch");
        if (c.kernel <= 0 || c.stride <= 0 || c.out_channels <= 0) {
            throw std::invalid_argument("architecture: bad conv spec");
        }
        if ((dim - c.kernel) % c.stride != 0 || dim < c.kernel) {
            throw std::invalid_argument("architecture: conv does not tile the input");
        }
        dim = (dim - c.kernel) / c.stride + 1;
        ch = c.out_channels;
    }
    for (int w : dense) {
        if (w <= 0) throw std::invalid_argument("architecture: dense width must be positive");
    }
}

std::vector<int> Architecture::conv_dims() const {
    std::vector<int> dims;
    int dim = patch;
    for (const ConvLayerSpec& c : convs) {
        dim = (dim - c.kernel) / c.stride + 1;
        dims.push_back(dim);
    }
    return dims;
}

int Architecture::conv_feature_dim() const {
    if (convs.empty()) return patch * patch;
    const std::vector<int> dims = conv_dims();
    return convs.back().out_channels * dims.back() * dims.back();
}

int param_count(const Architecture& arch) {
    arch.validate();
    return make_layout(arch).total;
}

std::pair<int, int> value_head_range(const Architecture& arch) {
    const Layout lay = make_layout(arch);
    return {lay.value_w.offset, lay.value_b.offset + lay.value_b.size};
}

StudentParams init_params(const Architecture& arch, std::uint64_t seed) {
    arch.validate();
    const Layout lay = make_layout(arch);
    StudentParams p;
    p.arch = arch;
    p.theta.assign(static_cast<std::size_t>(lay.total), 0.0);
    Rng rng(derive_seed(seed, "init"));

    for (std::size_t l = 0; l < arch.convs.size(); ++l) {
        const ConvLayerSpec& c = arch.convs[l];
        orthogonal_fill(p.theta.data() + lay.conv_w[l].offset, c.out_channels,
                        c.in_channels * c.kernel * c.kernel, rng);
    }
    int prev = arch.feature_dim();
    for (std::size_t j = 0; j < arch.dense.size(); ++j) {
        orthogonal_fill(p.theta.data() + lay.dense_w[j].offset, arch.dense[j], prev, rng);
        prev = arch.dense[j];
    }
    if (arch.recurrent) {
        const int h = arch.hidden_dim();
        orthogonal_fill(p.theta.data() + lay.wg.offset, h, h, rng);
        orthogonal_fill(p.theta.data() + lay.ug.offset, h, h, rng);
        orthogonal_fill(p.theta.data() + lay.wc.offset, h, h, rng);
        orthogonal_fill(p.theta.data() + lay.uc.offset, h, h, rng);
    }
    // Action head stays zero: the initial policy holds its box still.
    orthogonal_fill(p.theta.data() + lay.value_w.offset, 1, arch.hidden_dim(), rng);
    return p;
}

Memory initial_memory(const Architecture& arch) {
    Memory m;
    if (arch.recurrent) m.h.assign(static_cast<std::size_t>(arch.hidden_dim()), 0.0);
    return m;
}

StudentOutput forward(const StudentParams& params, const State& state, const Memory& memory) {
    params.arch.validate();
    const Layout lay = make_layout(params.arch);
    if (static_cast<int>(params.theta.size()) != lay.total) {
        throw std::invalid_argument("forward: parameter vector size mismatch");
    }
    StepTape tape;
    forward_step(params, lay, state, memory.h, tape);
    StudentOutput out;
    out.mu = tape.mu;
    out.value = tape.value;
    if (params.arch.recurrent) out.memory.h = tape.h_out;
    return out;
}

std::array<double, 4> sample_action_raw(const std::array<double, 4>& mu, double sigma, Rng& rng) {
    if (!(sigma > 0.0)) throw std::invalid_argument("sample_action: sigma must be > 0");
    std::array<double, 4> raw{};
    for (int d = 0; d < 4; ++d) {
        raw[static_cast<std::size_t>(d)] = rng.gaussian(mu[static_cast<std::size_t>(d)], sigma);
    }
    return raw;
}

Action sample_action(const std::array<double, 4>& mu, double sigma, Rng& rng) {
    return Action::from_array(sample_action_raw(mu, sigma, rng)).clamped();
}

double trajectory_loss(const StudentParams& params, const TrajectoryLossSpec& spec) {
    params.arch.validate();
    const Layout lay = make_layout(params.arch);
    std::vector<std::array<double, 4>> mu;
    std::vector<double> values;
    std::vector<double> h;
    if (params.arch.recurrent) h.assign(static_cast<std::size_t>(params.arch.hidden_dim()), 0.0);
    for (const State& s : spec.states) {
        StepTape tape;
        forward_step(params, lay, s, h, tape);
        mu.push_back(tape.mu);
        values.push_back(tape.value);
        if (params.arch.recurrent) h = tape.h_out;
    }
    return loss_from_outputs(spec, mu, values);
}

TrajectoryGradient gradient(const StudentParams& params, const TrajectoryLossSpec& spec) {
    params.arch.validate();
    const Layout lay = make_layout(params.arch);
    const int n = spec.size();
    TrajectoryGradient out;
    out.grad.assign(params.theta.size(), 0.0);

    std::vector<StepTape> tapes(static_cast<std::size_t>(n));
    std::vector<double> h;
    if (params.arch.recurrent) h.assign(static_cast<std::size_t>(params.arch.hidden_dim()), 0.0);
    std::vector<std::array<double, 4>> mu;
    std::vector<double> values;
    for (int i = 0; i < n; ++i) {
        forward_step(params, lay, spec.states[static_cast<std::size_t>(i)], h,
                     tapes[static_cast<std::size_t>(i)]);
        mu.push_back(tapes[static_cast<std::size_t>(i)].mu);
        values.push_back(tapes[static_cast<std::size_t>(i)].value);
        if (params.arch.recurrent) h = tapes[static_cast<std::size_t>(i)].h_out;
    }
    out.loss = loss_from_outputs(spec, mu, values);

    const double inv_var = 1.0 / (spec.sigma * spec.sigma);
    std::vector<double> dh_carry;
    for (int i = n - 1; i >= 0; --i) {
        const std::size_t k = static_cast<std::size_t>(i);
        std::array<double, 4> dmu{};
        double dvalue = 0.0;
        if (spec.weight_policy != 0.0) {
            // d(-A logpi)/dmu = -A (raw - mu)/sigma^2
            for (int d = 0; d < 4; ++d) {
                const std::size_t dd = static_cast<std::size_t>(d);
                dmu[dd] += spec.weight_policy * (-spec.advantages[k]) *
                           (spec.action_raw[k][dd] - mu[k][dd]) * inv_var;
            }
        }
        if (spec.weight_value != 0.0) {
            dvalue += spec.weight_value * (values[k] - spec.returns[k]);
        }
        if (spec.weight_distill != 0.0 && spec.masks[k] != 0.0) {
            for (int d = 0; d < 4; ++d) {
                const std::size_t dd = static_cast<std::size_t>(d);
                const double diff = mu[k][dd] - spec.teacher_actions[k][dd];
                const double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
                dmu[dd] += spec.weight_distill * spec.masks[k] * sgn;
            }
        }
        backward_step(params, lay, tapes[k], dmu, dvalue, dh_carry, out.grad);
    }

    if (!std::isfinite(out.loss)) throw std::runtime_error("gradient: non-finite loss");
    for (double g : out.grad) {
        if (!std::isfinite(g)) throw std::runtime_error("gradient: non-finite gradient entry");
    }
    return out;
}

AdamState init_adam(const StudentParams& params) {
    AdamState s;
    s.m.assign(params.theta.size(), 0.0);
    s.v.assign(params.theta.size(), 0.0);
    return s;
}

void adam_step(StudentParams& params, const std::vector<double>& grad, AdamState& state,
               double lr_main, double lr_value_head) {
    if (grad.size() != params.theta.size() || state.m.size() != params.theta.size()) {
        throw std::invalid_argument("adam_step: size mismatch");
    }
    for (double g : grad) {
        if (!std::isfinite(g)) throw std::invalid_argument("adam_step: non-finite gradient");
    }
    state.step += 1;
    const double b1t = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double b2t = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    const auto [vh_begin, vh_end] = value_head_range(params.arch);
    for (std::size_t i = 0; i < params.theta.size(); ++i) {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
        const double mhat = state.m[i] / b1t;
        const double vhat = state.v[i] / b2t;
        const bool in_value_head =
            static_cast<int>(i) >= vh_begin && static_cast<int>(i) < vh_end;
        const double lr = in_value_head ? lr_value_head : lr_main;
        params.theta[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
    write_pod(os, kCheckpointMagic);
    write_pod(os, kCheckpointVersion);
    const Architecture& a = ckpt.params.arch;
    write_pod<std::int32_t>(os, a.patch);
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(a.convs.size()));
    for (const ConvLayerSpec& c : a.convs) {
        write_pod<std::int32_t>(os, c.in_channels);
        write_pod<std::int32_t>(os, c.out_channels);
        write_pod<std::int32_t>(os, c.kernel);
        write_pod<std::int32_t>(os, c.stride);
    }
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(a.dense.size()));
    for (int w : a.dense) write_pod<std::int32_t>(os, w);
    write_pod<std::uint8_t>(os, a.recurrent ? 1 : 0);
    write_doubles(os, ckpt.params.theta);
    write_pod<std::uint64_t>(os, ckpt.adam.step);
    write_doubles(os, ckpt.adam.m);
    write_doubles(os, ckpt.adam.v);
    write_pod(os, ckpt.adam.beta1);
    write_pod(os, ckpt.adam.beta2);
    write_pod(os, ckpt.adam.eps);
    write_pod(os, ckpt.config_hash);
    write_pod(os, ckpt.master_seed);
    if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open: " + path);
    if (read_pod<std::uint32_t>(is) != kCheckpointMagic) {
        throw std::runtime_error("checkpoint: bad magic: " + path);
    }
    if (read_pod<std::uint32_t>(is) != kCheckpointVersion) {
        throw std::runtime_error("checkpoint: unsupported version: " + path);
    }
    Checkpoint ckpt;
    Architecture a;
    a.patch = read_pod<std::int32_t>(is);
    a.convs.resize(read_pod<std::uint32_t>(is));
    for (ConvLayerSpec& c : a.convs) {
        c.in_channels = read_pod<std::int32_t>(is);
        c.out_channels = read_pod<std::int32_t>(is);
        c.kernel = read_pod<std::int32_t>(is);
        c.stride = read_pod<std::int32_t>(is);
    }
    a.dense.resize(read_pod<std::uint32_t>(is));
    for (int& w : a.dense) w = read_pod<std::int32_t>(is);
    a.recurrent = read_pod<std::uint8_t>(is) != 0;
    a.validate();
    ckpt.params.arch = a;
    ckpt.params.theta = read_doubles(is);
    if (static_cast<int>(ckpt.params.theta.size()) != param_count(a)) {
        throw std::runtime_error("checkpoint: parameter count does not match architecture");
    }
    ckpt.adam.step = read_pod<std::uint64_t>(is);
    ckpt.adam.m = read_doubles(is);
    ckpt.adam.v = read_doubles(is);
    ckpt.adam.beta1 = read_pod<double>(is);
    ckpt.adam.beta2 = read_pod<double>(is);
    ckpt.adam.eps = read_pod<double>(is);
    ckpt.config_hash = read_pod<std::uint64_t>(is);
    ckpt.master_seed = read_pod<std::uint64_t>(is);
    return ckpt;
}

}  // namespace adatrack
