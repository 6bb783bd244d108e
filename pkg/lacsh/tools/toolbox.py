# coding=utf-8
"""
.. moduleauthor:: lacsh developers

The module :mod:`toolbox` provides a class :class:`Toolbox` on the basis of :class:`deap.base.Toolbox` for registering
the update steps of a Markov chain scan. The chain driver :func:`~lacsh.algorithms.basic.run_chain` retrieves the
steps and their order from the toolbox, so a custom scan (for instance one that holds some parameters fixed or swaps
the Metropolis target) is built by registering different steps.
"""
import collections

from deap import base


class Toolbox(base.Toolbox):
    """
    A toolbox holding the update steps of one scan. Initially, the toolbox contains the :meth:`clone` and :meth:`map`
    methods of :class:`deap.base.Toolbox`. Steps are registered with :meth:`register` under aliases starting with
    ``'update'``.

    As an extension of :class:`deap.base.Toolbox`, this class adds a :attr:`schedule`, an
    :class:`~collections.OrderedDict` remembering the order in which steps were inserted: if ``'update_H'`` is inserted
    before ``'update_a'``, the step with the alias ``'update_H'`` is applied earlier in every scan. A registered step that
    is not in the schedule is never applied, which holds its parameters fixed.

    A short way to combine step registration and scheduling is to pass the keyword-only argument ``step=True`` into
    :meth:`register`.
    """

    def __init__(self):
        super().__init__()
        self._schedule = collections.OrderedDict()

    def register(self, alias, function, *args, **kargs):
        """
        Register a *function* in the toolbox under the name *alias*. Default arguments are bound by partial
        application and can be overridden at call time.

        :param alias: the name of the step; an existing alias is overwritten
        :param function: the function to which the alias refers
        :param args: positional arguments to bind, optional
        :param kargs: keyword arguments to bind, optional. The special keyword ``step`` is never bound: when true, the
            alias is appended to :attr:`schedule`.
        """
        step = kargs.pop('step', False)
        super().register(alias, function, *args, **kargs)
        if step:
            self._schedule[alias] = True

    def unregister(self, alias):
        super().unregister(alias)
        self._schedule.pop(alias, None)

    @property
    def schedule(self):
        """
        The ordered step aliases applied in every scan.
        """
        return self._schedule


__all__ = ['Toolbox']
