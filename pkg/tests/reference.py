"""Straight-line reference stepper for the four-population circuit.

Written independently of the vectorised kernel: plain Python lists and
scalar loops, one equation per line.  Used only by the test suite to check
the kernel spike-for-spike and weight-for-weight.
"""


class ReferenceCircuit:
    def __init__(self, n, threshold, leak, alpha_s, alpha_g, alpha_p, alpha_d,
                 w_drive, gate_inhibition, replay_bias,
                 eta_rec, eta_pred, wmin_rec, wmax_rec, wmin_pred, wmax_pred,
                 w_rec, w_pred):
        self.n = n
        self.theta = threshold
        self.leak = leak
        self.alpha = {"s": alpha_s, "g": alpha_g, "p": alpha_p, "d": alpha_d}
        self.w_drive = w_drive
        self.gate_inhibition = gate_inhibition
        self.replay_bias = replay_bias
        self.eta_rec = eta_rec
        self.eta_pred = eta_pred
        self.rec_bounds = (wmin_rec, wmax_rec)
        self.pred_bounds = (wmin_pred, wmax_pred)
        self.w_rec = [list(row) for row in w_rec]
        self.w_pred = [list(row) for row in w_pred]
        self.online = True
        self.r = 1
        self.plastic = True
        self.quench()

    def quench(self):
        n = self.n
        self.v = {k: [0.0] * n for k in "sgpd"}
        self.tr = {k: [0.0] * n for k in "sgpd"}
        # past[k][0] = spikes at t-1, past[k][1] = spikes at t-2
        self.past = {k: [[0.0] * n, [0.0] * n] for k in "sgpd"}

    def set_online(self, online):
        self.online = online
        self.r = 1 if online else 0
        self.quench()

    def step(self, ext):
        n = self.n
        s1 = self.past["s"][0]
        s2 = self.past["s"][1]
        g1 = self.past["g"][0]
        d1 = self.past["d"][0]

        cur = {k: [0.0] * n for k in "sgpd"}
        for j in range(n):
            acc = 0.0
            for i in range(n):
                acc += self.w_rec[i][j] * s1[i]
            cur["s"][j] += acc

            acc = 0.0
            for i in range(n):
                acc += (self.w_drive if i == j else 0.0) * s1[i]
            cur["g"][j] += acc

            acc = 0.0
            for i in range(n):
                acc += (self.w_drive if i == j else 0.0) * g1[i]
            cur["p"][j] += acc
            acc = 0.0
            for i in range(n):
                acc += self.w_pred[i][j] * d1[i]
            cur["p"][j] += acc

            acc = 0.0
            for i in range(n):
                acc += (self.w_drive if i == j else 0.0) * s2[i]
            cur["d"][j] += acc

        bias = {
            "s": 0.0 if self.online else self.replay_bias,
            "g": -self.gate_inhibition if self.online else 0.0,
            "p": 0.0,
            "d": 0.0,
        }
        spk = {}
        for k in "sgpd":
            out = [0.0] * n
            for j in range(n):
                e = (ext[j] if k == "s" else 0.0) + bias[k]
                u = self.leak * self.v[k][j] + cur[k][j] + e
                if u >= self.theta:
                    out[j] = 1.0
                    self.v[k][j] = 0.0
                else:
                    self.v[k][j] = u
            spk[k] = out

        if self.plastic:
            gain = self.eta_rec * self.r
            if gain != 0:
                lo, hi = self.rec_bounds
                x, xt = spk["s"], self.tr["s"]
                for i in range(n):
                    for j in range(n):
                        if i == j:
                            continue
                        w = self.w_rec[i][j] + gain * (xt[i] * x[j] - x[i] * xt[j])
                        self.w_rec[i][j] = min(max(w, lo), hi)
            gain = self.eta_pred * (1 - self.r)
            if gain != 0:
                lo, hi = self.pred_bounds
                d, dt = spk["d"], self.tr["d"]
                y, yt = spk["p"], self.tr["p"]
                for i in range(n):
                    for j in range(n):
                        w = self.w_pred[i][j] + gain * (dt[i] * y[j] - d[i] * yt[j])
                        self.w_pred[i][j] = min(max(w, lo), hi)

        for k in "sgpd":
            for j in range(n):
                self.tr[k][j] = self.alpha[k] * self.tr[k][j] + spk[k][j]
            self.past[k] = [spk[k], self.past[k][0]]
        return spk
