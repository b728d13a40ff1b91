"""Five coordinate networks (u_x, u_y, s_xx, s_yy, s_xy) and their exact derivatives."""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

FIELD_NAMES = ("ux", "uy", "sxx", "syy", "sxy")


class FieldMLP(nn.Module):
    """Fully connected Swish network mapping (x_bar, y_bar, t) to one scalar.

    Inputs are shifted to [-1, 1] inside the module using the time window,
    so derivatives taken through it are with respect to the raw coordinates.
    """

    def __init__(self, hidden_layers: int, width: int = 64, t_end: float = 1.0):
        super().__init__()
        layers = [nn.Linear(3, width), nn.SiLU()]
        for _ in range(hidden_layers - 1):
            layers += [nn.Linear(width, width), nn.SiLU()]
        layers.append(nn.Linear(width, 1))
        self.net = nn.Sequential(*layers)
        self.register_buffer("shift", torch.tensor([0.5, 0.5, 0.5 * t_end]))
        self.register_buffer("scale", torch.tensor([2.0, 2.0, 2.0 / t_end]))
        for m in self.net:
            if isinstance(m, nn.Linear):
                nn.init.xavier_normal_(m.weight)
                nn.init.zeros_(m.bias)

    @property
    def output_layer(self) -> nn.Linear:
        return self.net[-1]

    def forward(self, coords: torch.Tensor) -> torch.Tensor:
        return self.net((coords - self.shift) * self.scale).squeeze(-1)


class FieldNetworks(nn.Module):
    """Two displacement networks and three stress networks, all independent."""

    def __init__(self, u_layers: int = 12, s_layers: int = 16, width: int = 64, t_end: float = 1.0):
        super().__init__()
        self.u_layers, self.s_layers, self.width, self.t_end = u_layers, s_layers, width, t_end
        self.nets = nn.ModuleDict({
            "ux": FieldMLP(u_layers, width, t_end),
            "uy": FieldMLP(u_layers, width, t_end),
            "sxx": FieldMLP(s_layers, width, t_end),
            "syy": FieldMLP(s_layers, width, t_end),
            "sxy": FieldMLP(s_layers, width, t_end),
        })

    def forward(self, coords: torch.Tensor) -> dict[str, torch.Tensor]:
        return {k: net(coords) for k, net in self.nets.items()}

    def zero_outputs(self) -> None:
        with torch.no_grad():
            for net in self.nets.values():
                net.output_layer.weight.zero_()
                net.output_layer.bias.zero_()


@dataclass
class FieldEvaluation:
    """Values and derivatives at a batch of points; all tensors have shape [N].

    Derivative keys are ``d<field>_d<var>`` (``var`` in x, y) plus
    ``d2ux_dt2`` and ``d2uy_dt2``.
    """

    values: dict
    grads: dict

    def strain(self):
        """Dimensionless small strain (exx, eyy, exy), exy the tensor component."""
        g = self.grads
        return g["dux_dx"], g["duy_dy"], 0.5 * (g["dux_dy"] + g["duy_dx"])


def _grad(out, inp, create_graph):
    return torch.autograd.grad(out, inp, grad_outputs=torch.ones_like(out),
                               create_graph=create_graph, retain_graph=True)[0]


def evaluate_fields(coords: torch.Tensor, nets: FieldNetworks, *, derivatives: bool = True,
                    create_graph: bool = True) -> FieldEvaluation:
    """Evaluate all five fields at ``coords`` [N, 3] = (x_bar, y_bar, t).

    First derivatives of every field in x_bar and y_bar and second time
    derivatives of the displacements come from reverse-mode autodiff, i.e.
    they are exact for the network function.
    """
    if not derivatives:
        with torch.no_grad():
            return FieldEvaluation(nets(coords), {})
    x = coords.detach().clone().requires_grad_(True)
    values = nets(x)
    grads = {}
    for name in ("sxx", "syy", "sxy"):
        g = _grad(values[name], x, create_graph)
        grads[f"d{name}_dx"], grads[f"d{name}_dy"] = g[:, 0], g[:, 1]
    for name in ("ux", "uy"):
        g = _grad(values[name], x, True)
        grads[f"d{name}_dx"], grads[f"d{name}_dy"] = g[:, 0], g[:, 1]
        grads[f"d{name}_dt"] = g[:, 2]
        g2 = _grad(g[:, 2], x, create_graph)
        grads[f"d2{name}_dt2"] = g2[:, 2]
    if not create_graph:
        values = {k: v.detach() for k, v in values.items()}
        grads = {k: v.detach() for k, v in grads.items()}
    return FieldEvaluation(values, grads)
