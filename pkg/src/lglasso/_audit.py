"""Observers notified of every norm evaluation and every fit.

Used for instrumentation, e.g. to check certificates across a whole test run.
An observer is a callable ``f(kind, result)`` with ``kind`` in
{"omega", "fit"}; extra arguments describe the call.
"""

observers = []


def notify(kind, result, **info):
    for f in observers:
        f(kind, result, **info)
