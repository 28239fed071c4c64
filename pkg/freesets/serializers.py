"""
Validation of config, dataset, description and program files.

Every file is read into plain data first and validated by one of the
serializers below; unknown keys are rejected.
"""

import numpy as np
from rest_framework import serializers
from scipy import sparse

from .descriptions import DescriptionFlags, FreeDescription
from .equivariant import ConstraintClass
from .exceptions import InvalidDescription, InvalidExpression
from .groups import GroupFamily
from .operators import EquivariantOperator
from .regression import CostNorm, UMode
from .sequences import parse_sequence
from .solver import ConeSpec
from .symmetry_reduction import InvariantREProgram, InvariantSDP, SageInstance

FORMAT_VERSION = 1
FAMILY_CHOICES = [family.value for family in GroupFamily]


class StrictSerializer(serializers.Serializer):
    """Serializer that rejects keys it does not declare."""

    def to_internal_value(self, data):
        if isinstance(data, dict):
            unknown = sorted(set(data) - set(self.fields))
            if unknown:
                raise serializers.ValidationError({key: ['Unknown key.'] for key in unknown})
        return super().to_internal_value(data)


def _parse_sequences(attrs, names, family=None):
    for name in names:
        if attrs.get(name) is None:
            continue
        try:
            attrs[name] = parse_sequence(attrs[name], family)
        except InvalidExpression as exc:
            raise serializers.ValidationError({name: [str(exc)]})
    return attrs


def _parse_cone(attrs):
    if attrs.get('cone') is None:
        return attrs
    try:
        attrs['cone'] = ConeSpec.parse(attrs['cone'])
    except InvalidExpression as exc:
        raise serializers.ValidationError({'cone': [str(exc)]})
    return attrs


def parse_levels(text):
    """``2..8`` or ``2, 3, 5``."""
    text = str(text).strip()
    try:
        if '..' in text:
            low, high = (int(part) for part in text.split('..'))
            levels = list(range(low, high + 1))
        else:
            levels = [int(part) for part in text.replace(',', ' ').split()]
    except ValueError:
        raise serializers.ValidationError(f'Cannot read levels from {text!r}.')
    if not levels or min(levels) < 1:
        raise serializers.ValidationError('Levels must be positive.')
    return levels


def parse_vector(text):
    try:
        return np.array([float(part) for part in str(text).replace(',', ' ').split()])
    except ValueError:
        raise serializers.ValidationError(f'Cannot read a vector from {text!r}.')


class ConfigSerializer(StrictSerializer):
    family = serializers.ChoiceField(choices=FAMILY_CHOICES, required=False)
    v = serializers.CharField(required=False)
    w = serializers.CharField(required=False)
    u = serializers.CharField(required=False)
    cone = serializers.CharField(required=False)
    n0 = serializers.IntegerField(min_value=1, required=False)
    levels = serializers.CharField(required=False)
    constraint = serializers.ChoiceField(
        choices=[c.value for c in ConstraintClass], default=ConstraintClass.EQUIVARIANT.value
    )
    u_mode = serializers.ChoiceField(choices=[m.value for m in UMode], default=UMode.IDENTITY.value)
    u_fixed = serializers.CharField(required=False)
    restarts = serializers.IntegerField(min_value=1, required=False)
    seed = serializers.IntegerField(default=0)
    lambda_min = serializers.FloatField(min_value=0, required=False)
    regularization = serializers.FloatField(min_value=0, required=False)
    max_alternations = serializers.IntegerField(min_value=1, required=False)
    stall_tolerance = serializers.FloatField(min_value=0, required=False)
    stall_rounds = serializers.IntegerField(min_value=1, required=False)
    norm = serializers.ChoiceField(choices=[n.value for n in CostNorm], default=CostNorm.L2.value)
    data = serializers.CharField(required=False)
    output = serializers.CharField(required=False)
    initial = serializers.CharField(required=False)
    name = serializers.CharField(required=False)
    solver = serializers.CharField(required=False)
    rank_tolerance = serializers.FloatField(min_value=0, required=False)
    residual_tolerance = serializers.FloatField(min_value=0, required=False)
    membership_tolerance = serializers.FloatField(min_value=0, required=False)

    def validate_levels(self, value):
        return parse_levels(value)

    def validate_u_fixed(self, value):
        return parse_vector(value)

    def validate(self, attrs):
        attrs = _parse_sequences(attrs, ('v', 'w', 'u'), attrs.get('family'))
        attrs = _parse_cone(attrs)
        if attrs['u_mode'] == UMode.FIXED.value and attrs.get('u_fixed') is None:
            raise serializers.ValidationError({'u_fixed': ['Required when u_mode is fixed.']})
        return attrs


class DatasetRecordSerializer(serializers.Serializer):
    level = serializers.IntegerField(min_value=1)
    point = serializers.ListField(child=serializers.FloatField(), allow_empty=True)
    target = serializers.FloatField()


def _triplets(matrix):
    coo = sparse.coo_matrix(matrix)
    order = np.lexsort((coo.col, coo.row))
    return [[int(coo.row[k]), int(coo.col[k]), float(coo.data[k])] for k in order]


def _matrix_from_triplets(entries, shape, field):
    rows, cols, values = [], [], []
    for entry in entries:
        if len(entry) != 3:
            raise serializers.ValidationError({field: ['Entries are [row, col, value] triplets.']})
        i, j, value = entry
        if int(i) != i or int(j) != j or not (0 <= i < shape[0] and 0 <= j < shape[1]):
            raise serializers.ValidationError({field: [f'Index ({i}, {j}) is outside {shape}.']})
        rows.append(int(i))
        cols.append(int(j))
        values.append(float(value))
    return sparse.csr_matrix((values, (rows, cols)), shape=shape)


class OperatorField(serializers.DictField):
    """{"shape": [rows, cols], "entries": [[i, j, value], ...]}."""

    def to_representation(self, operator):
        return {'shape': list(operator.matrix.shape), 'entries': _triplets(operator.matrix)}


class VectorField(serializers.DictField):
    """{"length": k, "entries": [[i, value], ...]}."""

    def to_representation(self, vector):
        index = np.flatnonzero(vector)
        return {'length': len(vector), 'entries': [[int(i), float(vector[i])] for i in index]}


class DescriptionSerializer(StrictSerializer):
    """
    Versioned description files. Operators and u0 are stored as sparse
    triplets in canonical bases at level n0; floats keep their shortest
    round-trip representation.
    """

    format = serializers.ChoiceField(choices=['freesets-description'])
    version = serializers.IntegerField(min_value=1, max_value=FORMAT_VERSION)
    name = serializers.CharField(allow_blank=True, required=False, default='')
    metric = serializers.ChoiceField(choices=['canonical'])
    v = serializers.CharField()
    w = serializers.CharField()
    u = serializers.CharField()
    cone = serializers.CharField()
    n0 = serializers.IntegerField(min_value=1)
    flags = serializers.ListField(child=serializers.CharField(), required=False, default=list)
    regularization = serializers.FloatField(min_value=0, default=0.0)
    a0 = OperatorField()
    b0 = OperatorField()
    u0 = VectorField()

    def to_representation(self, description):
        return {
            'format': 'freesets-description',
            'version': FORMAT_VERSION,
            'name': description.name,
            'metric': 'canonical',
            'v': description.seq_v.expression(),
            'w': description.seq_w.expression(),
            'u': description.seq_u.expression(),
            'cone': str(description.cone),
            'n0': description.n0,
            'flags': description.flags.names(),
            'regularization': float(description.regularization),
            'a0': self.fields['a0'].to_representation(description.a0),
            'b0': self.fields['b0'].to_representation(description.b0),
            'u0': self.fields['u0'].to_representation(np.asarray(description.u0)),
        }

    def _operator(self, attrs, field, source, target):
        n0 = attrs['n0']
        shape = (target.dim(n0), source.dim(n0))
        payload = attrs[field]
        if list(payload.get('shape', [])) != list(shape):
            raise serializers.ValidationError(
                {field: [f'Shape {payload.get("shape")} does not match {list(shape)}.']}
            )
        matrix = _matrix_from_triplets(payload.get('entries', []), shape, field)
        return EquivariantOperator(source, target, n0, n0, matrix)

    def validate(self, attrs):
        attrs = _parse_sequences(attrs, ('v', 'w', 'u'))
        attrs = _parse_cone(attrs)
        dim_u = attrs['u'].dim(attrs['n0'])
        a0 = self._operator(attrs, 'a0', attrs['v'], attrs['u'])
        b0 = self._operator(attrs, 'b0', attrs['w'], attrs['u'])
        payload = attrs['u0']
        if payload.get('length') != dim_u:
            raise serializers.ValidationError({'u0': [f'Length must be {dim_u}.']})
        u0 = np.zeros(dim_u)
        for entry in payload.get('entries', []):
            if len(entry) != 2 or not 0 <= int(entry[0]) < dim_u:
                raise serializers.ValidationError({'u0': ['Entries are [index, value] pairs.']})
            u0[int(entry[0])] = float(entry[1])
        try:
            flags = DescriptionFlags.from_names(attrs['flags'])
            attrs['description'] = FreeDescription(
                attrs['v'], attrs['w'], attrs['u'], attrs['cone'], a0, b0, u0, attrs['n0'],
                flags, attrs['regularization'], attrs['name'],
            )
        except InvalidDescription as exc:
            raise serializers.ValidationError(str(exc))
        return attrs

    def create(self, validated_data):
        return validated_data['description']


class SymmetricEntriesField(serializers.ListField):
    """Upper-triangle triplets [i, j, value] of a symmetric matrix."""

    child = serializers.ListField(child=serializers.FloatField(), min_length=3, max_length=3)

    def to_representation(self, matrix):
        upper = np.triu(np.asarray(matrix, dtype=float))
        return _triplets(upper)


def _symmetric(entries, dim, field):
    matrix = _matrix_from_triplets(entries, (dim, dim), field).toarray()
    return np.triu(matrix) + np.triu(matrix, 1).T


class ConstraintSerializer(StrictSerializer):
    entries = SymmetricEntriesField()
    rhs = serializers.FloatField()


class InvariantSDPSerializer(StrictSerializer):
    format = serializers.ChoiceField(choices=['freesets-sdp'])
    version = serializers.IntegerField(min_value=1, max_value=FORMAT_VERSION)
    sequence = serializers.CharField()
    level = serializers.IntegerField(min_value=1)
    sense = serializers.ChoiceField(choices=['min', 'max'], default='min')
    objective = SymmetricEntriesField()
    constraints = ConstraintSerializer(many=True, required=False, default=list)
    inequalities = ConstraintSerializer(many=True, required=False, default=list)

    def to_representation(self, sdp):
        def constraint_list(items):
            return [{'entries': _triplets(np.triu(a)), 'rhs': float(b)} for a, b in items]

        return {
            'format': 'freesets-sdp',
            'version': FORMAT_VERSION,
            'sequence': sdp.seq.expression(),
            'level': sdp.level,
            'sense': 'max' if sdp.maximize else 'min',
            'objective': _triplets(np.triu(sdp.objective)),
            'constraints': constraint_list(sdp.constraints),
            'inequalities': constraint_list(sdp.inequalities),
        }

    def validate(self, attrs):
        attrs = _parse_sequences(attrs, ('sequence',))
        dim = attrs['sequence'].dim(attrs['level'])
        constraints = [
            (_symmetric(item['entries'], dim, 'constraints'), item['rhs'])
            for item in attrs['constraints']
        ]
        inequalities = [
            (_symmetric(item['entries'], dim, 'inequalities'), item['rhs'])
            for item in attrs['inequalities']
        ]
        attrs['program'] = InvariantSDP(
            attrs['sequence'], attrs['level'], _symmetric(attrs['objective'], dim, 'objective'),
            constraints, inequalities, attrs['sense'] == 'max',
        )
        return attrs

    def create(self, validated_data):
        return validated_data['program']


class RelativeEntropyProgramSerializer(StrictSerializer):
    format = serializers.ChoiceField(choices=['freesets-relent'])
    version = serializers.IntegerField(min_value=1, max_value=FORMAT_VERSION)
    family = serializers.ChoiceField(choices=FAMILY_CHOICES)
    level = serializers.IntegerField(min_value=1)
    points = serializers.ListField(child=serializers.ListField(child=serializers.FloatField()))
    eq_matrix = serializers.ListField(
        child=serializers.ListField(child=serializers.FloatField()), required=False, default=list
    )
    eq_rhs = serializers.ListField(child=serializers.FloatField(), required=False, default=list)

    def to_representation(self, program):
        return {
            'format': 'freesets-relent',
            'version': FORMAT_VERSION,
            'family': GroupFamily(program.family).value,
            'level': program.level,
            'points': np.asarray(program.points, dtype=float).tolist(),
            'eq_matrix': np.asarray(program.eq_matrix, dtype=float).tolist(),
            'eq_rhs': np.asarray(program.eq_rhs, dtype=float).tolist(),
        }

    def validate(self, attrs):
        count = len(attrs['points'])
        if any(len(point) != attrs['level'] for point in attrs['points']):
            raise serializers.ValidationError(
                {'points': [f'Points need {attrs["level"]} coordinates.']}
            )
        if len(attrs['eq_matrix']) != len(attrs['eq_rhs']):
            raise serializers.ValidationError({'eq_rhs': ['One right-hand side per row.']})
        if any(len(row) != 2 * count for row in attrs['eq_matrix']):
            raise serializers.ValidationError(
                {'eq_matrix': [f'Rows act on (ν, c) of length {2 * count}.']}
            )
        attrs['program'] = InvariantREProgram(
            np.array(attrs['points']).reshape(count, attrs['level']),
            GroupFamily(attrs['family']),
            attrs['level'],
            np.array(attrs['eq_matrix']).reshape(len(attrs['eq_rhs']), 2 * count),
            np.array(attrs['eq_rhs']),
        )
        return attrs

    def create(self, validated_data):
        return validated_data['program']


class SageInstanceSerializer(StrictSerializer):
    format = serializers.ChoiceField(choices=['freesets-sage'])
    version = serializers.IntegerField(min_value=1, max_value=FORMAT_VERSION)
    family = serializers.ChoiceField(choices=FAMILY_CHOICES)
    level = serializers.IntegerField(min_value=1)
    a_points = serializers.ListField(child=serializers.ListField(child=serializers.FloatField()))
    b_points = serializers.ListField(
        child=serializers.ListField(child=serializers.FloatField()), required=False, default=list
    )
    a_coefficients = serializers.ListField(child=serializers.FloatField())
    b_coefficients = serializers.ListField(
        child=serializers.FloatField(), required=False, default=list
    )

    def to_representation(self, instance):
        return {
            'format': 'freesets-sage',
            'version': FORMAT_VERSION,
            'family': GroupFamily(instance.family).value,
            'level': instance.level,
            'a_points': np.asarray(instance.a_points, dtype=float).tolist(),
            'b_points': np.asarray(instance.b_points, dtype=float).tolist(),
            'a_coefficients': np.asarray(instance.a_coefficients, dtype=float).tolist(),
            'b_coefficients': np.asarray(instance.b_coefficients, dtype=float).tolist(),
        }

    def validate(self, attrs):
        level = attrs['level']
        for name in ('a_points', 'b_points'):
            if any(len(point) != level for point in attrs[name]):
                raise serializers.ValidationError({name: [f'Points need {level} coordinates.']})
        pairs = (('a_points', 'a_coefficients'), ('b_points', 'b_coefficients'))
        for points, coefficients in pairs:
            if len(attrs[points]) != len(attrs[coefficients]):
                raise serializers.ValidationError({coefficients: ['One coefficient per point.']})
        attrs['instance'] = SageInstance(
            GroupFamily(attrs['family']),
            level,
            np.array(attrs['a_points']).reshape(-1, level),
            np.array(attrs['b_points']).reshape(-1, level),
            np.array(attrs['a_coefficients']),
            np.array(attrs['b_coefficients']),
        )
        return attrs

    def create(self, validated_data):
        return validated_data['instance']


PROGRAM_SERIALIZERS = {
    'freesets-sdp': InvariantSDPSerializer,
    'freesets-relent': RelativeEntropyProgramSerializer,
    'freesets-sage': SageInstanceSerializer,
}
