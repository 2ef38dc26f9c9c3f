#include "dcmmc/circuit_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace dcmmc {

namespace {

constexpr double kForwardTolerance = 1e-9;  // V
constexpr int kMaxHalvingDepth = 3;

std::vector<std::uint8_t> to_mask(const GateFrame& f) {
    std::vector<std::uint8_t> m(f.series_flags.size());
    for (std::size_t j = 0; j < m.size(); ++j) m[j] = f.series_flags[j] ? 1 : 0;
    return m;
}

std::string dump_state(const ConverterState& s) {
    std::ostringstream os;
    os.precision(10);
    os << "t=" << s.time << " i_arm_u=" << s.arm_current_upper << " i_arm_l=" << s.arm_current_lower
       << " i_out=" << s.output_current;
    for (Arm a : {Arm::Upper, Arm::Lower}) {
        const auto& st = s.arm(a);
        os << (a == Arm::Upper ? "\n upper u:" : "\n lower u:");
        for (double v : st.cap_voltages) os << ' ' << v;
        os << "\n  clamp i:";
        for (double v : st.clamp_currents) os << ' ' << v;
    }
    return os.str();
}

// Solves A p = r1 and A q = r2 for symmetric tridiagonal A in one sweep.
void thomas2(std::size_t m, const double* diag, const double* off, const double* r1, const double* r2,
             double* cp, double* p, double* q) {
    if (m == 0) return;
    double den = diag[0];
    cp[0] = m > 1 ? off[0] / den : 0.0;
    p[0] = r1[0] / den;
    q[0] = r2[0] / den;
    for (std::size_t j = 1; j < m; ++j) {
        den = diag[j] - off[j - 1] * cp[j - 1];
        cp[j] = j + 1 < m ? off[j] / den : 0.0;
        p[j] = (r1[j] - off[j - 1] * p[j - 1]) / den;
        q[j] = (r2[j] - off[j - 1] * q[j - 1]) / den;
    }
    for (std::size_t j = m - 1; j-- > 0;) {
        p[j] -= cp[j] * p[j + 1];
        q[j] -= cp[j] * q[j + 1];
    }
}

}  // namespace

double EnergyTally::dissipation() const {
    return arm_resistance + capacitor_esr + leak + switch_conduction + diode_conduction + clamp_inductor +
           clamp_turnoff + switching;
}

EnergyTally& EnergyTally::operator+=(const EnergyTally& o) {
    source += o.source;
    load += o.load;
    arm_resistance += o.arm_resistance;
    capacitor_esr += o.capacitor_esr;
    leak += o.leak;
    switch_conduction += o.switch_conduction;
    diode_conduction += o.diode_conduction;
    clamp_inductor += o.clamp_inductor;
    clamp_turnoff += o.clamp_turnoff;
    switching += o.switching;
    return *this;
}

EnergyTally EnergyTally::operator-(const EnergyTally& o) const {
    EnergyTally r = *this;
    r.source -= o.source;
    r.load -= o.load;
    r.arm_resistance -= o.arm_resistance;
    r.capacitor_esr -= o.capacitor_esr;
    r.leak -= o.leak;
    r.switch_conduction -= o.switch_conduction;
    r.diode_conduction -= o.diode_conduction;
    r.clamp_inductor -= o.clamp_inductor;
    r.clamp_turnoff -= o.clamp_turnoff;
    r.switching -= o.switching;
    return r;
}

double stored_energy(const ConverterConfig& cfg, const ConverterState& s) {
    double e = 0.5 * cfg.arm_inductance *
               (s.arm_current_upper * s.arm_current_upper + s.arm_current_lower * s.arm_current_lower);
    for (Arm a : {Arm::Upper, Arm::Lower}) {
        const auto& st = s.arm(a);
        const auto& mods = cfg.modules(a);
        const auto& clamps = cfg.clamps(a);
        for (std::size_t j = 0; j < st.cap_voltages.size(); ++j) {
            e += 0.5 * mods[j].capacitance * st.cap_voltages[j] * st.cap_voltages[j];
        }
        for (std::size_t j = 0; j < st.clamp_currents.size(); ++j) {
            e += 0.5 * clamps[j].inductance * st.clamp_currents[j] * st.clamp_currents[j];
        }
    }
    return e;
}

SimulationDiverged::SimulationDiverged(const std::string& what, ConverterState last_valid)
    : std::runtime_error(what), last_valid_(std::move(last_valid)) {}

LegEngine::LegEngine(const ConverterConfig& cfg, double dt)
    : cfg_(cfg), n_(cfg.modules_per_arm), dt_(dt), base_dt_(dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("LegEngine: dt must be > 0");
    omega_ = 2.0 * kPi * cfg_.fundamental_freq;
    load_current_ = phase_current(cfg_);
    const auto n = static_cast<std::size_t>(n_);
    for (ArmWork* w : {&wu_, &wl_}) {
        w->s.assign(n, 0);
        w->sigma.assign(n, 1.0);
        w->cond.assign(n - 1, 0);
        for (auto* v : {&w->diag, &w->off, &w->rhs, &w->coup, &w->p, &w->q, &w->cp, &w->x, &w->dg, &w->rb, &w->cf,
                        &w->of}) {
            v->assign(n - 1, 0.0);
        }
        w->list.reserve(n);
        w->ic.assign(n, 0.0);
    }
    set_dt(dt);
}

void LegEngine::build_coeffs(Arm arm, ArmCoeffs& c) const {
    const auto& mods = cfg_.modules(arm);
    const auto& clamps = cfg_.clamps(arm);
    const auto n = static_cast<std::size_t>(n_);
    c.a.resize(n);
    c.b.resize(n);
    c.z.resize(n);
    c.cap.resize(n);
    c.leak_g.resize(n);
    c.esr.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        const auto& m = mods[j];
        const double g = m.leak_resistance ? 1.0 / *m.leak_resistance : 0.0;
        c.leak_g[j] = g;
        c.a[j] = 1.0 / (1.0 + dt_ * g / m.capacitance);
        c.b[j] = c.a[j] * dt_ / m.capacitance;
        c.z[j] = c.b[j] + m.esr;
        c.cap[j] = m.capacitance;
        c.esr[j] = m.esr;
    }
    c.l_dt.resize(n - 1);
    c.r_loop.resize(n - 1);
    c.l.resize(n - 1);
    c.v_fd.resize(n - 1);
    c.r_d.resize(n - 1);
    c.r_l.resize(n - 1);
    for (std::size_t j = 0; j + 1 < n; ++j) {
        const auto& k = clamps[j];
        c.l[j] = k.inductance;
        c.l_dt[j] = k.inductance / dt_;
        c.r_loop[j] = cfg_.sw.on_resistance + k.diode_resistance + k.inductor_resistance;
        c.v_fd[j] = k.diode_drop;
        c.r_d[j] = k.diode_resistance;
        c.r_l[j] = k.inductor_resistance;
    }
}

void LegEngine::set_dt(double dt) {
    dt_ = dt;
    build_coeffs(Arm::Upper, cu_);
    build_coeffs(Arm::Lower, cl_);
    arm_l_dt_ = cfg_.arm_inductance / dt_;
    arm_z_ = arm_l_dt_ + cfg_.arm_resistance;
    load_l_dt_ = cfg_.load.inductance / dt_;
    load_z_ = load_l_dt_ + cfg_.load.resistance;
}

double LegEngine::load_current(double t) const {
    return load_current_.amplitude * std::sin(omega_ * t - load_current_.angle);
}

void LegEngine::prepare_arm(const ArmState& st, const ArmCoeffs& c, double i_arm_old, ArmWork& w) const {
    const auto n = static_cast<std::size_t>(n_);
    const double r_sw = cfg_.sw.on_resistance;
    const double v_sw = cfg_.sw.on_drop;
    const double* __restrict u = st.cap_voltages.data();
    const double* __restrict x = st.clamp_currents.data();
    const double* __restrict a = c.a.data();
    const double* __restrict z = c.z.data();
    const double* __restrict l_dt = c.l_dt.data();
    const double* __restrict r_loop = c.r_loop.data();
    const double* __restrict v_fd = c.v_fd.data();
    const std::uint8_t* __restrict sg = w.s.data();
    double* __restrict sigma = w.sigma.data();
    double* __restrict dg = w.dg.data();
    double* __restrict rb = w.rb.data();
    double* __restrict cf = w.cf.data();
    double* __restrict of = w.of.data();

    sigma[0] = i_arm_old >= 0.0 ? 1.0 : -1.0;
    for (std::size_t j = 1; j < n; ++j) sigma[j] = i_arm_old + x[j - 1] >= 0.0 ? 1.0 : -1.0;
    double alpha0 = 0.0, beta0 = static_cast<double>(n) * r_sw, sigma_sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double on = sg[j] ? 1.0 : 0.0;
        sigma_sum += sigma[j];
        alpha0 += on * a[j] * u[j];
        beta0 += on * z[j];
    }
    w.alpha0 = alpha0 + v_sw * sigma_sum;
    w.beta0 = beta0;

    // Full-pattern coefficients; the diode pattern only selects rows.
    for (std::size_t j = 0; j + 1 < n; ++j) {
        const double g = sg[j + 1] ? 0.0 : 1.0;
        const double on = sg[j] ? 1.0 : 0.0;
        dg[j] = l_dt[j] + r_loop[j] + g * z[j + 1] + z[j];
        rb[j] = l_dt[j] * x[j] + g * a[j + 1] * u[j + 1] - a[j] * u[j] - v_sw * sigma[j + 1] - v_fd[j];
        cf[j] = r_sw + on * z[j];
        of[j] = -g * z[j + 1];
    }
}

void LegEngine::solve_arm(const ArmState&, const ArmCoeffs&, ArmWork& w) const {
    const std::size_t m = static_cast<std::size_t>(n_ - 1);
    w.list.clear();
    for (std::size_t j = 0; j < m; ++j) {
        if (w.cond[j]) w.list.push_back(static_cast<int>(j));
    }
    double alpha = w.alpha0, beta = w.beta0;
    const std::size_t k = w.list.size();
    if (k > 0) {
        // Compressed tridiagonal over the conducting rows; rows that are not
        // neighbours in the chain do not couple.
        for (std::size_t i = 0; i < k; ++i) {
            const auto j = static_cast<std::size_t>(w.list[i]);
            w.diag[i] = w.dg[j];
            w.rhs[i] = w.rb[j];
            w.coup[i] = w.cf[j];
            if (i + 1 < k) w.off[i] = w.list[i + 1] == w.list[i] + 1 ? w.of[j] : 0.0;
        }
        thomas2(k, w.diag.data(), w.off.data(), w.rhs.data(), w.coup.data(), w.cp.data(), w.p.data(), w.q.data());
        for (std::size_t i = 0; i < k; ++i) {
            alpha += w.coup[i] * w.p[i];
            beta -= w.coup[i] * w.q[i];
        }
    }
    w.alpha = alpha;
    w.beta = beta;
}

void LegEngine::solve_leg(const ConverterState& s, double t_next, double& i_u, double& i_l, double& i_o) const {
    const double vdc = cfg_.dc_voltage;
    if (cfg_.load.kind == LoadKind::CurrentSource) {
        i_o = load_current(t_next);
        const double num = vdc - wu_.alpha - wl_.alpha + (wl_.beta + arm_z_) * i_o +
                           arm_l_dt_ * (s.arm_current_upper + s.arm_current_lower);
        i_u = num / (wu_.beta + wl_.beta + 2.0 * arm_z_);
        i_l = i_u - i_o;
    } else {
        const double a11 = wu_.beta + arm_z_ + load_z_;
        const double a12 = -load_z_;
        const double a21 = load_z_;
        const double a22 = -(load_z_ + wl_.beta + arm_z_);
        const double hist = load_l_dt_ * s.output_current;
        const double b1 = 0.5 * vdc - wu_.alpha + arm_l_dt_ * s.arm_current_upper + hist;
        const double b2 = -0.5 * vdc + wl_.alpha - arm_l_dt_ * s.arm_current_lower + hist;
        const double det = a11 * a22 - a12 * a21;
        i_u = (b1 * a22 - a12 * b2) / det;
        i_l = (a11 * b2 - a21 * b1) / det;
        i_o = i_u - i_l;
    }
}

int LegEngine::check_arm(const ArmState&, const ArmCoeffs&, ArmWork& w, double i_arm, bool flip_all,
                         double& worst, int& worst_index) const {
    const auto m = static_cast<std::size_t>(n_ - 1);
    double* __restrict x = w.x.data();
    const double* __restrict rb = w.rb.data();
    const double* __restrict cf = w.cf.data();
    const double* __restrict of = w.of.data();
    const double* __restrict dg = w.dg.data();
    std::uint8_t* __restrict cond = w.cond.data();
    std::fill(x, x + m, 0.0);
    for (std::size_t i = 0; i < w.list.size(); ++i) {
        x[static_cast<std::size_t>(w.list[i])] = w.p[i] - w.q[i] * i_arm;
    }

    int violations = 0;
    for (std::size_t j = 0; j < m; ++j) {
        double excess;
        if (cond[j]) {
            if (!(x[j] < 0.0)) continue;
            excess = -x[j] * dg[j];
        } else {
            // Loop voltage available to drive the blocked branch with x_j = 0.
            double r = rb[j] - cf[j] * i_arm;
            if (j + 1 < m) r -= of[j] * x[j + 1];
            if (j > 0) r -= of[j - 1] * x[j - 1];
            if (!(r > kForwardTolerance)) continue;
            excess = r;
        }
        ++violations;
        if (flip_all) {
            cond[j] ^= 1;
        } else if (excess > worst) {
            worst = excess;
            worst_index = static_cast<int>(j);
        }
    }
    return violations;
}

void LegEngine::apply_switching(ConverterState& s, std::span<const std::uint8_t> ug,
                                std::span<const std::uint8_t> lg, EnergyTally* tally) {
    if (&s != synced_) {
        for (Arm a : {Arm::Upper, Arm::Lower}) {
            auto& w = a == Arm::Upper ? wu_ : wl_;
            const auto& g = s.arm(a).gate_series;
            for (std::size_t j = 0; j < g.size(); ++j) w.s[j] = g[j] ? 1 : 0;
        }
        synced_ = &s;
    }
    const double t_sw = cfg_.sw.turn_on_time + cfg_.sw.turn_off_time;
    for (Arm a : {Arm::Upper, Arm::Lower}) {
        auto& w = a == Arm::Upper ? wu_ : wl_;
        const auto gates = a == Arm::Upper ? ug : lg;
        if (std::equal(gates.begin(), gates.end(), w.s.begin())) continue;
        auto& st = s.arm(a);
        const auto& c = a == Arm::Upper ? cu_ : cl_;
        const double i_arm = a == Arm::Upper ? s.arm_current_upper : s.arm_current_lower;
        for (std::size_t j = 0; j < gates.size(); ++j) {
            const std::uint8_t on = gates[j] ? 1 : 0;
            if (on == w.s[j]) continue;
            w.s[j] = on;
            st.gate_series[j] = on != 0;
            if (t_sw <= 0.0) continue;
            double& u = st.cap_voltages[j];
            const double i_sw = i_arm + (j > 0 ? st.clamp_currents[j - 1] : 0.0);
            const double e = 0.5 * std::abs(u) * std::abs(i_sw) * t_sw;
            const double u2 = std::max(0.0, u * u - 2.0 * e / c.cap[j]);
            const double u_new = std::copysign(std::sqrt(u2), u);
            if (tally) tally->switching += 0.5 * c.cap[j] * (u * u - u_new * u_new);
            u = u_new;
        }
    }
}

bool LegEngine::try_step(ConverterState& s, double dt, EnergyTally* tally, StepFlags* flags, int& iterations) {
    const auto n = static_cast<std::size_t>(n_);
    for (std::size_t j = 0; j + 1 < n; ++j) {
        wu_.cond[j] = s.upper.clamp_currents[j] > 0.0 ? 1 : 0;
        wl_.cond[j] = s.lower.clamp_currents[j] > 0.0 ? 1 : 0;
    }
    prepare_arm(s.upper, cu_, s.arm_current_upper, wu_);
    prepare_arm(s.lower, cl_, s.arm_current_lower, wl_);
    const int max_iters = std::max(1, cfg_.numerics.diode_resolution_max_iters);
    const double t_next = s.time + dt;
    double i_u = 0.0, i_l = 0.0, i_o = 0.0;
    bool settled = false;
    for (int it = 1; it <= max_iters; ++it) {
        iterations = it;
        solve_arm(s.upper, cu_, wu_);
        solve_arm(s.lower, cl_, wl_);
        solve_leg(s, t_next, i_u, i_l, i_o);
        const bool flip_all = it <= max_iters / 2;
        double worst_u = 0.0, worst_l = 0.0;
        int idx_u = -1, idx_l = -1;
        const int viol = check_arm(s.upper, cu_, wu_, i_u, flip_all, worst_u, idx_u) +
                         check_arm(s.lower, cl_, wl_, i_l, flip_all, worst_l, idx_l);
        if (viol == 0) {
            settled = true;
            break;
        }
        if (!flip_all) {
            if (worst_u >= worst_l && idx_u >= 0) {
                wu_.cond[static_cast<std::size_t>(idx_u)] ^= 1;
            } else if (idx_l >= 0) {
                wl_.cond[static_cast<std::size_t>(idx_l)] ^= 1;
            }
        }
    }
    if (!settled) return false;

    // Commit.
    const double r_sw = cfg_.sw.on_resistance;
    const double v_sw = cfg_.sw.on_drop;
    const double half_vdc = 0.5 * cfg_.dc_voltage;
    double v_out;
    if (cfg_.load.kind == LoadKind::CurrentSource) {
        v_out = half_vdc - wu_.alpha - wu_.beta * i_u - arm_z_ * i_u + arm_l_dt_ * s.arm_current_upper;
    } else {
        v_out = load_z_ * i_o - load_l_dt_ * s.output_current;
    }
    EnergyTally e;
    for (Arm a : {Arm::Upper, Arm::Lower}) {
        auto& st = s.arm(a);
        auto& w = a == Arm::Upper ? wu_ : wl_;
        const auto& c = a == Arm::Upper ? cu_ : cl_;
        const double i_arm = a == Arm::Upper ? i_u : i_l;
        const double* __restrict x = w.x.data();
        const double* __restrict ca = c.a.data();
        const double* __restrict cb = c.b.data();
        const double* __restrict esr = c.esr.data();
        const double* __restrict leak_g = c.leak_g.data();
        const double* __restrict sigma = w.sigma.data();
        const std::uint8_t* __restrict sg = w.s.data();
        double* __restrict ic = w.ic.data();
        double* __restrict u = st.cap_voltages.data();
        double esr_p = 0.0, leak_p = 0.0, sw_p = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double x_in = j + 1 < n ? x[j] : 0.0;
            const double x_prev = j > 0 ? x[j - 1] : 0.0;
            const double cur = (sg[j] ? i_arm : -x_prev) + x_in;
            ic[j] = cur;
            const double u_new = ca[j] * u[j] + cb[j] * cur;
            u[j] = u_new;
            const double i_sw = i_arm + x_prev;
            esr_p += esr[j] * cur * cur;
            leak_p += leak_g[j] * u_new * u_new;
            sw_p += r_sw * i_sw * i_sw + v_sw * sigma[j] * i_sw;
        }
        e.capacitor_esr += esr_p;
        e.leak += leak_p;
        e.switch_conduction += sw_p;
        double* __restrict xs = st.clamp_currents.data();
        for (std::size_t j = 0; j + 1 < n; ++j) {
            const double xj = x[j];
            const double x_old = xs[j];
            if (w.cond[j]) {
                e.diode_conduction += c.v_fd[j] * xj + c.r_d[j] * xj * xj;
                e.clamp_inductor += c.r_l[j] * xj * xj;
                if (flags && x_old <= 0.0) ++flags->diode_turn_on;
            } else if (x_old > 0.0) {
                e.clamp_turnoff += 0.5 * c.l[j] * x_old * x_old / dt;
                if (flags) {
                    ++flags->diode_turn_off;
                    ++flags->zero_clamped;
                }
            }
            xs[j] = xj;
        }
    }
    if (tally) {
        e.source = half_vdc * (i_u + i_l);
        e.load = v_out * i_o;
        e.arm_resistance = cfg_.arm_resistance * (i_u * i_u + i_l * i_l);
        // Everything above is a power; scale to energy for this step.
        EnergyTally scaled;
        scaled.source = e.source * dt;
        scaled.load = e.load * dt;
        scaled.arm_resistance = e.arm_resistance * dt;
        scaled.capacitor_esr = e.capacitor_esr * dt;
        scaled.leak = e.leak * dt;
        scaled.switch_conduction = e.switch_conduction * dt;
        scaled.diode_conduction = e.diode_conduction * dt;
        scaled.clamp_inductor = e.clamp_inductor * dt;
        scaled.clamp_turnoff = e.clamp_turnoff * dt;
        *tally += scaled;
    }
    s.arm_current_upper = i_u;
    s.arm_current_lower = i_l;
    s.output_current = i_o;
    s.time = t_next;
    v_out_ = v_out;
    return true;
}

int LegEngine::substep(ConverterState& s, std::span<const std::uint8_t> ug, std::span<const std::uint8_t> lg,
                       double dt, int depth, EnergyTally* tally, StepFlags* flags) {
    if (dt != dt_) set_dt(dt);
    int iterations = 0;
    if (try_step(s, dt, tally, flags, iterations)) return iterations;
    if (depth >= kMaxHalvingDepth) {
        throw DiodeResolutionError("diode pattern did not settle after " +
                                   std::to_string(cfg_.numerics.diode_resolution_max_iters) +
                                   " iterations and " + std::to_string(kMaxHalvingDepth) +
                                   " step halvings\n" + dump_state(s));
    }
    if (flags) ++flags->halvings;
    const int a = substep(s, ug, lg, 0.5 * dt, depth + 1, tally, flags);
    const int b = substep(s, ug, lg, 0.5 * dt, depth + 1, tally, flags);
    return std::max(a, b);
}

int LegEngine::step(ConverterState& s, std::span<const std::uint8_t> upper_gates,
                    std::span<const std::uint8_t> lower_gates, EnergyTally* tally, StepFlags* flags) {
    const auto n = static_cast<std::size_t>(n_);
    if (upper_gates.size() != n || lower_gates.size() != n) {
        throw std::invalid_argument("LegEngine::step: gate mask size must equal modules_per_arm");
    }
    apply_switching(s, upper_gates, lower_gates, tally);
    const int iterations = substep(s, upper_gates, lower_gates, base_dt_, 0, tally, flags);
    if (dt_ != base_dt_) set_dt(base_dt_);
    return iterations;
}

std::pair<DiodePattern, DiodePattern> LegEngine::resolve(const ConverterState& s,
                                                         std::span<const std::uint8_t> upper_gates,
                                                         std::span<const std::uint8_t> lower_gates) {
    ConverterState copy = s;
    synced_ = nullptr;
    apply_switching(copy, upper_gates, lower_gates, nullptr);
    int iterations = 0;
    if (!try_step(copy, dt_, nullptr, nullptr, iterations)) {
        synced_ = nullptr;
        throw DiodeResolutionError("diode pattern did not settle\n" + dump_state(s));
    }
    synced_ = nullptr;
    return {wu_.cond, wl_.cond};
}

TopologyMatrices assemble(const ConverterConfig& cfg, const ConverterState& s, const GateFrame& upper_gates,
                          const GateFrame& lower_gates, const DiodePattern& upper_diodes,
                          const DiodePattern& lower_diodes, double dt) {
    const auto n = static_cast<std::size_t>(cfg.modules_per_arm);
    if (upper_gates.series_flags.size() != n || lower_gates.series_flags.size() != n ||
        upper_diodes.size() + 1 != n || lower_diodes.size() + 1 != n) {
        throw std::invalid_argument("assemble: gate or diode pattern size mismatch");
    }
    // A throwaway engine carries the per-dt constants.
    struct Access : LegEngine {
        using LegEngine::LegEngine;
        TopologyMatrices build(const ConverterState& s, const GateFrame& ug, const GateFrame& lg,
                               const DiodePattern& ud, const DiodePattern& ld) {
            auto arm_system = [&](Arm a, const GateFrame& f, const DiodePattern& d) {
                auto& w = a == Arm::Upper ? wu_ : wl_;
                const auto& c = a == Arm::Upper ? cu_ : cl_;
                const auto mask = to_mask(f);
                std::copy(mask.begin(), mask.end(), w.s.begin());
                std::copy(d.begin(), d.end(), w.cond.begin());
                prepare_arm(s.arm(a), c, a == Arm::Upper ? s.arm_current_upper : s.arm_current_lower, w);
                const std::size_t m = d.size();
                ArmSystem sys;
                sys.diag.resize(m);
                sys.rhs.resize(m);
                sys.coupling.resize(m);
                sys.off.assign(m > 0 ? m - 1 : 0, 0.0);
                for (std::size_t j = 0; j < m; ++j) {
                    sys.diag[j] = d[j] ? w.dg[j] : 1.0;
                    sys.rhs[j] = d[j] ? w.rb[j] : 0.0;
                    sys.coupling[j] = d[j] ? w.cf[j] : 0.0;
                    if (j + 1 < m && d[j] && d[j + 1]) sys.off[j] = w.of[j];
                }
                sys.alpha0 = w.alpha0;
                sys.beta0 = w.beta0;
                return sys;
            };
            TopologyMatrices t;
            t.upper = arm_system(Arm::Upper, ug, ud);
            t.lower = arm_system(Arm::Lower, lg, ld);
            t.arm_impedance = arm_z_;
            t.load_impedance = cfg_.load.kind == LoadKind::SeriesRL ? load_z_ : 0.0;
            return t;
        }
    };
    Access engine(cfg, dt);
    return engine.build(s, upper_gates, lower_gates, upper_diodes, lower_diodes);
}

std::pair<DiodePattern, DiodePattern> resolve_diodes(const ConverterConfig& cfg, const ConverterState& s,
                                                     const GateFrame& upper_gates, const GateFrame& lower_gates) {
    LegEngine engine(cfg, cfg.numerics.time_step);
    const auto ug = to_mask(upper_gates);
    const auto lg = to_mask(lower_gates);
    return engine.resolve(s, ug, lg);
}

StepResult step(const ConverterConfig& cfg, const ConverterState& s, const GateFrame& upper_gates,
                const GateFrame& lower_gates, double dt) {
    LegEngine engine(cfg, dt);
    StepResult r;
    r.next_state = s;
    const auto ug = to_mask(upper_gates);
    const auto lg = to_mask(lower_gates);
    r.diode_iterations = engine.step(r.next_state, ug, lg, nullptr, &r.flags);
    return r;
}

double displacement_at(const DisplacementSchedule& schedule, double initial, double t) {
    double v = initial;
    for (const auto& e : schedule) {
        if (e.time <= t) v = e.delta_a;
    }
    return v;
}

void MemoryTraceSink::begin(const ConverterConfig&, bool clamp_currents) {
    clamps_ = clamp_currents;
    rows_.clear();
}

void MemoryTraceSink::row(const ConverterState& s, double v_out) {
    Row r;
    r.time = s.time;
    r.u_upper = s.upper.cap_voltages;
    r.u_lower = s.lower.cap_voltages;
    r.i_arm_upper = s.arm_current_upper;
    r.i_arm_lower = s.arm_current_lower;
    r.v_out = v_out;
    r.i_out = s.output_current;
    if (clamps_) {
        r.clamp_upper = s.upper.clamp_currents;
        r.clamp_lower = s.lower.clamp_currents;
    }
    rows_.push_back(std::move(r));
}

double SimTrace::audit_residual() const {
    return energy.source - energy.load - energy.dissipation() - (stored_final - stored_initial);
}

SimTrace simulate(const ConverterConfig& config, const SimulationPlan& plan) {
    const ConverterConfig cfg = checked_config(config);
    for (const auto& e : plan.schedule) {
        if (e.delta_a < 0.0) throw std::invalid_argument("displacement schedule: delta_a must be >= 0");
        if (e.time < 0.0 || e.time > cfg.numerics.duration) {
            throw std::invalid_argument("displacement schedule: time outside the simulated duration");
        }
    }
    DisplacementSchedule schedule = plan.schedule;
    std::stable_sort(schedule.begin(), schedule.end(),
                     [](const DisplacementStep& a, const DisplacementStep& b) { return a.time < b.time; });

    const double dt = cfg.numerics.time_step;
    const auto n = static_cast<std::size_t>(cfg.modules_per_arm);
    const long long steps = std::llround(cfg.numerics.duration / dt);
    const long long per_cycle = std::max<long long>(1, std::llround(1.0 / (cfg.fundamental_freq * dt)));
    const long long full_cycles = steps / per_cycle;
    const long long decimation = std::max(1, cfg.numerics.record_decimation);
    long long capture_from = steps;
    if (plan.capture_cycles > 0 && full_cycles > 0) {
        capture_from = std::max<long long>(0, full_cycles - plan.capture_cycles) * per_cycle;
    }

    LegEngine engine(cfg, dt);
    double delta = displacement_at(schedule, cfg.total_displacement, 0.0);
    GateGenerator gates(cfg, plan.delay, delta);
    std::size_t next_event = 0;
    while (next_event < schedule.size() && schedule[next_event].time <= 0.0) ++next_event;

    std::vector<std::uint8_t> ug(n), lg(n);
    ConverterState state = initial_state(cfg);
    gates.evaluate(0.0, ug, lg);
    for (std::size_t j = 0; j < n; ++j) {
        state.upper.gate_series[j] = ug[j] != 0;
        state.lower.gate_series[j] = lg[j] != 0;
    }

    SimTrace trace;
    trace.dt = dt;
    trace.fundamental_freq = cfg.fundamental_freq;
    trace.stored_initial = stored_energy(cfg, state);
    if (plan.capture_cycles > 0) {
        trace.vout_capture.reserve(static_cast<std::size_t>(steps - capture_from));
        trace.capture_start = static_cast<double>(capture_from) * dt;
    }
    if (plan.sink) {
        plan.sink->begin(cfg, plan.record_clamp_currents);
        double inserted = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (state.upper.gate_series[j]) inserted += state.upper.cap_voltages[j];
        }
        plan.sink->row(state, 0.5 * cfg.dc_voltage - inserted);
    }

    std::vector<double> sum_u_up(n, 0.0), sum_u_lo(n, 0.0), sum_ic2_up(n, 0.0), sum_ic2_lo(n, 0.0);
    double sum_iu = 0.0, sum_iu2 = 0.0, sum_il = 0.0, sum_il2 = 0.0, sum_abs_iu = 0.0;
    long long in_cycle = 0;
    double cycle_start = 0.0;
    StepFlags flags;
    ConverterState before = state;

    for (long long k = 0; k < steps; ++k) {
        const double t_mid = (static_cast<double>(k) + 0.5) * dt;
        if (next_event < schedule.size() && schedule[next_event].time <= t_mid) {
            while (next_event < schedule.size() && schedule[next_event].time <= t_mid) {
                delta = schedule[next_event].delta_a;
                ++next_event;
            }
            gates.set_total_displacement(delta);
        }
        gates.evaluate(t_mid, ug, lg);
        int iterations = 0;
        try {
            iterations = engine.step(state, ug, lg, &trace.energy, &flags);
        } catch (const DiodeResolutionError& e) {
            throw SimulationDiverged(e.what(), before);
        }
        state.time = static_cast<double>(k + 1) * dt;
        trace.max_diode_iterations = std::max(trace.max_diode_iterations, iterations);
        if (!std::isfinite(state.arm_current_upper) || !std::isfinite(state.arm_current_lower) ||
            !std::isfinite(engine.last_output_voltage())) {
            throw SimulationDiverged("non-finite state at t = " + std::to_string(state.time), before);
        }
        const double v_out = engine.last_output_voltage();

        const auto ic_u = engine.last_cap_currents(Arm::Upper);
        const auto ic_l = engine.last_cap_currents(Arm::Lower);
        for (std::size_t j = 0; j < n; ++j) {
            sum_u_up[j] += state.upper.cap_voltages[j];
            sum_u_lo[j] += state.lower.cap_voltages[j];
            sum_ic2_up[j] += ic_u[j] * ic_u[j];
            sum_ic2_lo[j] += ic_l[j] * ic_l[j];
        }
        for (std::size_t j = 0; j + 1 < n; ++j) {
            if (state.upper.clamp_currents[j] < 0.0) ++trace.complementarity_violations;
            if (state.lower.clamp_currents[j] < 0.0) ++trace.complementarity_violations;
        }
        sum_iu += state.arm_current_upper;
        sum_iu2 += state.arm_current_upper * state.arm_current_upper;
        sum_abs_iu += std::abs(state.arm_current_upper);
        sum_il += state.arm_current_lower;
        sum_il2 += state.arm_current_lower * state.arm_current_lower;
        ++in_cycle;

        if (k >= capture_from) trace.vout_capture.push_back(v_out);
        if (plan.sink && (k + 1) % decimation == 0) plan.sink->row(state, v_out);

        if (in_cycle == per_cycle) {
            for (std::size_t j = 0; j < n; ++j) {
                if (!std::isfinite(state.upper.cap_voltages[j]) || !std::isfinite(state.lower.cap_voltages[j])) {
                    throw SimulationDiverged("non-finite capacitor voltage at t = " + std::to_string(state.time),
                                             before);
                }
            }
            const double inv = 1.0 / static_cast<double>(per_cycle);
            CycleRecord rec;
            rec.t_start = cycle_start;
            rec.mean_u_upper.resize(n);
            rec.mean_u_lower.resize(n);
            rec.ms_cap_current_upper.resize(n);
            rec.ms_cap_current_lower.resize(n);
            for (std::size_t j = 0; j < n; ++j) {
                rec.mean_u_upper[j] = sum_u_up[j] * inv;
                rec.mean_u_lower[j] = sum_u_lo[j] * inv;
                rec.ms_cap_current_upper[j] = sum_ic2_up[j] * inv;
                rec.ms_cap_current_lower[j] = sum_ic2_lo[j] * inv;
            }
            rec.mean_i_upper = sum_iu * inv;
            rec.ms_i_upper = sum_iu2 * inv;
            rec.mean_abs_i_upper = sum_abs_iu * inv;
            rec.mean_i_lower = sum_il * inv;
            rec.ms_i_lower = sum_il2 * inv;
            rec.total_displacement = delta;
            rec.energy_end = trace.energy;
            rec.stored_end = stored_energy(cfg, state);
            trace.cycles.push_back(std::move(rec));
            if (plan.progress) plan.progress(state.time);

            std::fill(sum_u_up.begin(), sum_u_up.end(), 0.0);
            std::fill(sum_u_lo.begin(), sum_u_lo.end(), 0.0);
            std::fill(sum_ic2_up.begin(), sum_ic2_up.end(), 0.0);
            std::fill(sum_ic2_lo.begin(), sum_ic2_lo.end(), 0.0);
            sum_iu = sum_iu2 = sum_il = sum_il2 = sum_abs_iu = 0.0;
            in_cycle = 0;
            cycle_start = state.time;
            before = state;
        }
    }
    if (plan.sink) plan.sink->end();

    trace.steps = steps;
    trace.halvings = flags.halvings;
    trace.diode_turn_ons = flags.diode_turn_on;
    trace.stored_final = stored_energy(cfg, state);
    trace.final_state = std::move(state);
    return trace;
}

}  // namespace dcmmc
