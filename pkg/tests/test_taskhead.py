import math

import pytest
import torch

from crossgraft.alignment import AlignedTransitions
from crossgraft.errors import ContractError
from crossgraft.networks import init_parameters
from crossgraft.taskhead import accuracy, evaluate, task_loss
from crossgraft.trainer import make_generator

from conftest import rand_images


def _uniform_classifier(model):
    """Zero the linear head: logits all equal -> uniform softmax."""
    with torch.no_grad():
        model.classifier.head.weight.zero_()
        model.classifier.head.bias.zero_()
    return model.classifier


class TestTaskLoss:
    def test_uniform_logits(self, tiny_model, tiny_arch):
        cls = _uniform_classifier(tiny_model)
        x = rand_images(8, size=tiny_arch.image_size, seed=1)
        y = torch.arange(8) % 10
        loss = task_loss(cls, x, x.clone(), y)
        assert float(loss) == pytest.approx(2 * math.log(10), abs=1e-4)
        assert float(loss) == pytest.approx(4.6052, abs=1e-4)

    def test_confident_correct_goes_to_zero(self, tiny_model, tiny_arch):
        cls = tiny_model.classifier
        x = rand_images(4, size=tiny_arch.image_size, seed=2)
        y = torch.tensor([0, 1, 2, 3])

        class Sharp(torch.nn.Module):
            def __init__(self, inner):
                super().__init__()
                self.inner = inner
                self.head = inner.head

            def forward(self, z):
                out = torch.full((z.shape[0], 10), -1e4)
                out[torch.arange(z.shape[0]), y] = 1e4
                return out

        loss = task_loss(Sharp(cls), x, x.clone(), y)
        assert float(loss) == pytest.approx(0.0, abs=1e-6)

    def test_batch_permutation_invariance(self, tiny_model, tiny_arch):
        cls = tiny_model.classifier.eval()
        x1 = rand_images(6, size=tiny_arch.image_size, seed=3)
        x2 = rand_images(6, size=tiny_arch.image_size, seed=4)
        y = torch.tensor([1, 4, 0, 9, 2, 7])
        perm = torch.tensor([5, 3, 0, 1, 4, 2])
        a = task_loss(cls, x1, x2, y)
        b = task_loss(cls, x1[perm], x2[perm], y[perm])
        assert float(a) == pytest.approx(float(b), rel=1e-5)

    def test_label_range_contract(self, tiny_model, tiny_arch):
        x = rand_images(2, size=tiny_arch.image_size)
        with pytest.raises(ContractError):
            task_loss(tiny_model.classifier, x, x.clone(), torch.tensor([0, 10]))

    def test_softmax_normalization(self, tiny_model, tiny_arch):
        logits = tiny_model.classifier(rand_images(5, size=tiny_arch.image_size, seed=6))
        probs = torch.softmax(logits, dim=1)
        assert torch.allclose(probs.sum(dim=1), torch.ones(5), atol=1e-6)


class TestEvaluate:
    def test_channel_selector(self, tiny_model, tiny_arch):
        tiny_model.eval()
        a = rand_images(6, size=tiny_arch.image_size, seed=7)
        b = rand_images(6, size=tiny_arch.image_size, seed=8)
        y = torch.zeros(6, dtype=torch.long)
        aligned = AlignedTransitions(a, b)
        acc_st = evaluate(tiny_model.classifier, "st", aligned, y)
        acc_by_hand = accuracy(tiny_model.classifier, a, y)
        assert acc_st == acc_by_hand
        with pytest.raises(ContractError):
            evaluate(tiny_model.classifier, "sx", aligned, y)

    def test_untrained_classifier_near_chance(self, tiny_arch):
        """Binomial oracle: balanced 10-class data, random net -> ~0.1."""
        from crossgraft.grafting import StackSplit
        from crossgraft.model import TransitionModel

        model = TransitionModel(tiny_arch, StackSplit(1, 2), init_generator=make_generator(123, "init"))
        model.eval()
        n = 3000
        x = rand_images(n, size=tiny_arch.image_size, seed=9)
        y = torch.arange(n) % 10
        acc = accuracy(model.classifier, x, y)
        # binomial(n, 0.1) 3-sigma band is ~0.1 +- 0.017; spec allows 0.03
        assert abs(acc - 0.1) < 0.03
