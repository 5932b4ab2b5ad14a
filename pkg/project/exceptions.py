from typing import Any, Dict


class ServiceException(Exception):
    code = ''

    def __init__(self, *args, code='', message='') -> None:
        self.code = code
        self.message = message or (str(args[0]) if args else code)
        super().__init__(*(args or (self.message,)))

    def __reduce__(self):
        # keep the code when raised inside a joblib worker process
        return _rebuild, (type(self), self.args, self.code, self.message)

    def to_dict(self) -> Dict[str, Any]:
        return {'code': self.code, 'message': self.message}


def _rebuild(cls, args, code, message) -> ServiceException:
    return cls(*args, code=code, message=message)
