from typing import Literal

FieldName = Literal['real', 'complex']
Side = Literal['inside', 'outside']
