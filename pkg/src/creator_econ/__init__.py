"""Online contract design and recommendation learning for the creator economy."""
